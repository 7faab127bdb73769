/** Page wiring for the review UI.
 *
 * Flow: load the queue, open an item, highlight evidence in the top reference,
 * submit the annotation, tune guidance and regenerate, then deliver.
 */

import { ApiClient, ApiError } from "./api.js";
import { renderTokenRow } from "./colormap.js";
import { createHighlightEditor, type HighlightEditor } from "./highlight.js";
import { renderQueue } from "./queue.js";
import { createRegenerateControls, renderComparison } from "./regenerate.js";
import type { ReviewItem } from "./types.js";

const api = new ApiClient();

const el = (id: string): HTMLElement => {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node;
};

let currentItem: ReviewItem | null = null;
let editor: HighlightEditor | null = null;

function showError(err: unknown): void {
  const box = el("error-box");
  box.hidden = false;
  box.textContent = err instanceof ApiError ? `${err.code}: ${err.message}` : String(err);
}

function clearError(): void {
  const box = el("error-box");
  box.hidden = true;
  box.textContent = "";
}

async function loadQueue(): Promise<void> {
  const { items } = await api.listItems();
  renderQueue(el("queue"), items, (itemId) => {
    void openItem(itemId);
  });
}

function referenceText(item: ReviewItem): string {
  return item.references.length > 0 ? item.references[0].caption : "";
}

async function openItem(itemId: string): Promise<void> {
  clearError();
  try {
    const item = await api.getItem(itemId);
    currentItem = item;
    el("detail").hidden = false;
    el("detail-question").textContent = item.question;
    el("detail-answer").textContent = item.initial_answer ?? "";
    el("detail-entropy").textContent = item.entropy
      ? `normalized entropy ${item.entropy.normalized_pe.toFixed(3)}`
      : "";
    renderTokenRow(el("detail-tokens"), item.initial_token_probs);

    const refs = el("detail-references");
    refs.textContent = "";
    for (const ref of item.references) {
      const li = document.createElement("li");
      li.textContent = `${ref.caption} (sim ${ref.similarity.toFixed(3)}, ${ref.matched_feature})`;
      refs.appendChild(li);
    }

    const submit = el("annotate-submit") as HTMLButtonElement;
    editor = createHighlightEditor(el("reference-editor"), submit, referenceText(item));

    const comparison = el("comparison");
    comparison.hidden = true;
    comparison.textContent = "";
    if (item.regenerated_answer !== null) renderComparison(comparison, item);
  } catch (err) {
    showError(err);
  }
}

async function submitAnnotation(): Promise<void> {
  if (!currentItem || !editor) return;
  clearError();
  try {
    currentItem = await api.submitAnnotation(
      currentItem.item_id,
      referenceText(currentItem),
      editor.getSpans(),
    );
    await loadQueue();
  } catch (err) {
    showError(err);
  }
}

async function deliver(): Promise<void> {
  if (!currentItem) return;
  clearError();
  try {
    currentItem = await api.deliver(currentItem.item_id);
    await loadQueue();
  } catch (err) {
    showError(err);
  }
}

function init(): void {
  createRegenerateControls(el("regenerate-form") as HTMLFormElement, (params) => {
    if (!currentItem) return;
    clearError();
    api
      .regenerate(currentItem.item_id, params)
      .then((item) => {
        currentItem = item;
        renderComparison(el("comparison"), item);
        return loadQueue();
      })
      .catch(showError);
  });
  el("annotate-submit").addEventListener("click", () => void submitAnnotation());
  el("deliver-button").addEventListener("click", () => void deliver());
  void loadQueue().catch(showError);
}

init();
