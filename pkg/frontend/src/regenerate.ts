/** Guidance parameter sliders and the regenerated-answer comparison panel.
 *
 * Defaults match the service's guidance defaults. The comparison panel only
 * appears after the regenerate call succeeds, so it always reflects real
 * service output.
 */

import type { GuidanceParams, ReviewItem } from "./types.js";
import { renderTokenRow } from "./colormap.js";

export const GUIDANCE_DEFAULTS: GuidanceParams = { alpha: 0.01, beta: 3.0, gamma: 1.3 };

interface SliderSpec {
  name: keyof GuidanceParams;
  label: string;
  min: string;
  max: string;
  step: string;
}

const SLIDERS: SliderSpec[] = [
  { name: "alpha", label: "α (context attenuation)", min: "0", max: "1", step: "0.01" },
  { name: "beta", label: "β (highlight prior)", min: "1", max: "10", step: "0.1" },
  // γ below 1 would invert the guidance direction, so the slider floors at 1.
  { name: "gamma", label: "γ (guidance strength)", min: "1.0", max: "3", step: "0.05" },
];

export interface RegenerateControls {
  form: HTMLFormElement;
  getParams(): GuidanceParams;
}

export function createRegenerateControls(
  form: HTMLFormElement,
  onSubmit: (params: GuidanceParams) => void,
): RegenerateControls {
  form.textContent = "";
  const inputs = new Map<string, HTMLInputElement>();
  for (const spec of SLIDERS) {
    const label = document.createElement("label");
    label.textContent = spec.label;
    const input = document.createElement("input");
    input.type = "range";
    input.name = spec.name;
    input.min = spec.min;
    input.max = spec.max;
    input.step = spec.step;
    input.value = String(GUIDANCE_DEFAULTS[spec.name]);
    const value = document.createElement("output");
    value.textContent = input.value;
    input.addEventListener("input", () => {
      value.textContent = input.value;
    });
    label.append(input, value);
    form.appendChild(label);
    inputs.set(spec.name, input);
  }
  const button = document.createElement("button");
  button.type = "submit";
  button.textContent = "Regenerate";
  form.appendChild(button);

  const getParams = (): GuidanceParams => ({
    alpha: Number(inputs.get("alpha")!.value),
    beta: Number(inputs.get("beta")!.value),
    gamma: Number(inputs.get("gamma")!.value),
  });

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    onSubmit(getParams());
  });

  return { form, getParams };
}

/** Fill the side-by-side comparison panel from a regenerated item and show it. */
export function renderComparison(panel: HTMLElement, item: ReviewItem): void {
  panel.textContent = "";
  panel.hidden = false;
  panel.classList.add("comparison-panel");

  const initial = document.createElement("section");
  const initialTitle = document.createElement("h3");
  initialTitle.textContent = "Initial answer";
  const initialText = document.createElement("p");
  initialText.className = "answer-text answer-initial";
  initialText.textContent = item.initial_answer ?? "";
  const initialTokens = document.createElement("div");
  renderTokenRow(initialTokens, item.initial_token_probs);
  initial.append(initialTitle, initialText, initialTokens);

  const regen = document.createElement("section");
  const regenTitle = document.createElement("h3");
  regenTitle.textContent = "Regenerated answer";
  const regenText = document.createElement("p");
  regenText.className = "answer-text answer-regenerated";
  regenText.textContent = item.regenerated_answer ?? "";
  const regenTokens = document.createElement("div");
  renderTokenRow(regenTokens, item.regenerated_token_probs ?? []);
  regen.append(regenTitle, regenText, regenTokens);

  if (item.guidance_config) {
    const cfg = document.createElement("p");
    cfg.className = "guidance-used";
    const { alpha, beta, gamma } = item.guidance_config;
    cfg.textContent = `α=${alpha} β=${beta} γ=${gamma}`;
    regen.appendChild(cfg);
  }

  panel.append(initial, regen);
}
