import type { Suggestion } from "../types.js";

/** Ranked prospective connections, rendered strictly in API order. */
export function renderSuggestions(root: HTMLElement, items: Suggestion[]): void {
  root.replaceChildren();
  if (items.length === 0) {
    const empty = document.createElement("p");
    empty.className = "empty-note";
    empty.textContent = "No candidates left to suggest at this stage.";
    root.appendChild(empty);
    return;
  }
  const list = document.createElement("ol");
  list.className = "suggestion-list";
  for (const item of items) {
    const entry = document.createElement("li");
    entry.dataset.id = String(item.id);
    entry.innerHTML =
      `<span class="sugg-id">user ${item.id}</span>` +
      `<span class="sugg-country">${item.country}</span>` +
      `<span class="sugg-conf">${(item.confidence * 100).toFixed(1)}%</span>`;
    list.appendChild(entry);
  }
  root.appendChild(list);
}
