import { describe, expect, it } from "vitest";

import { renderQueue } from "../src/queue.js";
import type { ItemSummary } from "../src/types.js";

import queueThree from "./fixtures/queue_three.json";
import queueEmpty from "./fixtures/queue_empty.json";

function container(): HTMLElement {
  const div = document.createElement("div");
  document.body.appendChild(div);
  return div;
}

describe("renderQueue", () => {
  it("shows an empty-state message when the service returns no items", () => {
    const root = container();
    renderQueue(root, queueEmpty.items as ItemSummary[], () => {});
    expect(root.querySelector(".queue-empty")?.textContent).toMatch(/no items/i);
    expect(root.querySelectorAll(".queue-row")).toHaveLength(0);
  });

  it("renders one row per item in exactly the service's order", () => {
    const root = container();
    renderQueue(root, queueThree.items as ItemSummary[], () => {});
    const rows = [...root.querySelectorAll<HTMLElement>(".queue-row")];
    expect(rows.map((r) => r.dataset.itemId)).toEqual(["item2", "item1", "item0"]);
    const entropies = rows.map((r) => r.querySelector(".queue-entropy")?.textContent);
    expect(entropies).toEqual(["0.830", "0.446", "0.119"]);
  });

  it("renders a status chip per row", () => {
    const root = container();
    renderQueue(root, queueThree.items as ItemSummary[], () => {});
    const chips = [...root.querySelectorAll(".status-chip")];
    expect(chips).toHaveLength(3);
    for (const chip of chips) {
      expect(chip.textContent).toBe("pending");
      expect(chip.classList.contains("status-pending")).toBe(true);
    }
  });

  it("reports the clicked item id", () => {
    const root = container();
    const clicked: string[] = [];
    renderQueue(root, queueThree.items as ItemSummary[], (id) => clicked.push(id));
    root.querySelectorAll<HTMLElement>(".queue-row")[1].click();
    expect(clicked).toEqual(["item1"]);
  });
});
