/** Token probability colormap.
 *
 * Single-hue blue scale where darker means higher probability: lightness falls
 * linearly from 95% (p=0) to 35% (p=1), so the mapping is strictly monotone.
 * Both answer panels use this same absolute scale, which keeps initial and
 * regenerated answers visually comparable.
 */

import type { TokenProb } from "./types.js";

const HUE = 210;
const SATURATION = 70;
const LIGHT_MAX = 95;
const LIGHT_MIN = 35;

export function probLightness(prob: number): number {
  const p = Math.min(1, Math.max(0, prob));
  return LIGHT_MAX - (LIGHT_MAX - LIGHT_MIN) * p;
}

export function probColor(prob: number): string {
  return `hsl(${HUE}, ${SATURATION}%, ${probLightness(prob)}%)`;
}

/** Dark cells need light text to stay readable. */
function textColor(prob: number): string {
  return probLightness(prob) < 55 ? "#ffffff" : "#1a1a2e";
}

export function renderTokenRow(container: HTMLElement, tokens: TokenProb[]): void {
  container.textContent = "";
  container.classList.add("token-row");
  for (const token of tokens) {
    const cell = document.createElement("span");
    cell.className = "token-cell";
    cell.textContent = token.surface;
    cell.style.backgroundColor = probColor(token.prob);
    cell.style.color = textColor(token.prob);
    cell.dataset.prob = token.prob.toFixed(4);
    cell.title = `p=${token.prob.toFixed(4)}`;
    container.appendChild(cell);
  }
}
