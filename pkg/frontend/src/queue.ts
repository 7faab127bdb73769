/** Review queue listing.
 *
 * Rows are rendered in the exact order the service returned them (the service
 * already sorts pending items by entropy, highest first), so the UI never
 * reorders.
 */

import type { ItemSummary } from "./types.js";

export function renderQueue(
  container: HTMLElement,
  items: ItemSummary[],
  onSelect: (itemId: string) => void,
): void {
  container.textContent = "";
  if (items.length === 0) {
    const empty = document.createElement("p");
    empty.className = "queue-empty";
    empty.textContent = "No items in the queue.";
    container.appendChild(empty);
    return;
  }
  const list = document.createElement("ul");
  list.className = "queue-list";
  for (const item of items) {
    const row = document.createElement("li");
    row.className = "queue-row";
    row.dataset.itemId = item.item_id;

    const question = document.createElement("span");
    question.className = "queue-question";
    question.textContent = item.question;

    const entropy = document.createElement("span");
    entropy.className = "queue-entropy";
    entropy.textContent = item.entropy === null ? "–" : item.entropy.toFixed(3);
    entropy.title = "normalized predictive entropy";

    const status = document.createElement("span");
    status.className = `status-chip status-${item.status}`;
    status.textContent = item.status;

    row.append(question, entropy, status);
    row.addEventListener("click", () => onSelect(item.item_id));
    list.appendChild(row);
  }
  container.appendChild(list);
}
