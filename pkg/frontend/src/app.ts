/**
 * Auditor UI: a queue of label conflicts, a side-by-side annotation editor
 * with a per-token tag picker, and the iteration progress dashboard.
 *
 * All displayed state is derived from API responses; the only local state is
 * the auditor id (localStorage) and the in-progress edit of the currently
 * open item, which survives failed submissions.
 */

import { ApiError, AuditApi, AuditItem, ItemStatus, ItemSummary, IterationReport } from "./api";
import { NER_LABELS } from "./tags";
import { disagreementIndices, formatRate, statusLabel, submitGate } from "./viewmodel";

export interface AnnotationState {
  edited: string[];
  notice: string | null;
  retry: (() => void) | null;
}

export interface AnnotationHandlers {
  onChange(index: number, tag: string): void;
  onSubmit(): void;
  onSkip(): void;
  onCopy(source: "stored" | "predicted"): void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderQueue(
  root: HTMLElement,
  items: ItemSummary[],
  filter: ItemStatus | "open",
  onOpen: (id: string) => void,
  onFilter: (filter: ItemStatus | "open") => void,
): void {
  root.replaceChildren();
  const bar = el("div", "filter-bar");
  for (const option of ["open", "pending", "conflicted", "resolved"] as const) {
    const button = el("button", option === filter ? "filter active" : "filter", option);
    button.addEventListener("click", () => onFilter(option));
    bar.append(button);
  }
  root.append(bar);

  const visible = items.filter((item) =>
    filter === "open" ? item.status !== "resolved" : item.status === filter,
  );
  if (visible.length === 0) {
    root.append(el("p", "empty-state", "no pending items"));
    return;
  }
  const table = el("table", "queue");
  const head = el("tr");
  for (const title of ["sentence", "disagreements", "status", ""]) {
    head.append(el("th", undefined, title));
  }
  table.append(head);
  for (const item of visible) {
    const row = el("tr", `queue-row status-${item.status}`);
    row.dataset.itemId = item.item_id;
    row.append(el("td", "preview", item.preview));
    row.append(el("td", "count", String(item.disagreement_count)));
    row.append(el("td", "status", statusLabel(item.status)));
    const open = el("button", "open", "audit");
    open.addEventListener("click", () => onOpen(item.item_id));
    const cell = el("td");
    cell.append(open);
    row.append(cell);
    table.append(row);
  }
  root.append(table);
}

export function renderAnnotation(
  root: HTMLElement,
  item: AuditItem,
  state: AnnotationState,
  handlers: AnnotationHandlers,
): void {
  root.replaceChildren();
  root.append(el("h2", undefined, `sentence ${item.sentence_id}`));
  root.append(el("p", "status-line", `status: ${statusLabel(item.status)} (v${item.version})`));

  if (item.decisions.length > 0) {
    const box = el("div", "decisions");
    box.append(el("h3", undefined, "prior decisions"));
    for (const decision of item.decisions) {
      box.append(el("p", "decision", `${decision.auditor_id}: ${decision.tags.join(" ")}`));
    }
    root.append(box);
  }

  const differs = new Set(disagreementIndices(item.stored_tags, item.predicted_tags));
  const table = el("table", "annotation");
  const head = el("tr");
  for (const title of ["token", "stored", "predicted", "your tag"]) {
    head.append(el("th", undefined, title));
  }
  table.append(head);
  item.tokens.forEach((token, i) => {
    const row = el("tr", differs.has(i) ? "token-row disagree" : "token-row");
    row.append(el("td", "token", token));
    row.append(el("td", "stored", item.stored_tags[i]));
    row.append(el("td", "predicted", item.predicted_tags[i]));
    const select = el("select", "picker") as HTMLSelectElement;
    for (const label of NER_LABELS) {
      const option = el("option", undefined, label) as HTMLOptionElement;
      option.value = label;
      select.append(option);
    }
    select.value = state.edited[i] ?? "O";
    select.addEventListener("change", () => handlers.onChange(i, select.value));
    const cell = el("td");
    cell.append(select);
    row.append(cell);
    table.append(row);
  });
  root.append(table);

  const copies = el("div", "copy-bar");
  for (const source of ["stored", "predicted"] as const) {
    const button = el("button", "copy", `copy ${source}`);
    button.addEventListener("click", () => handlers.onCopy(source));
    copies.append(button);
  }
  root.append(copies);

  const gate = submitGate(state.edited, item.tokens.length);
  const controls = el("div", "controls");
  const submit = el("button", "submit", "submit") as HTMLButtonElement;
  submit.disabled = !gate.ok || item.status === "resolved";
  submit.addEventListener("click", () => handlers.onSubmit());
  const skip = el("button", "skip", "skip");
  skip.addEventListener("click", () => handlers.onSkip());
  controls.append(submit, skip);
  root.append(controls);

  if (!gate.ok) {
    root.append(el("p", "validation-hint", `invalid BIO2: ${gate.reason}`));
  }
  if (state.notice) {
    const banner = el("div", "notice");
    banner.append(el("span", undefined, state.notice));
    if (state.retry) {
      const retry = el("button", "retry", "retry");
      retry.addEventListener("click", () => state.retry?.());
      banner.append(retry);
    }
    root.append(banner);
  }
}

export function renderProgress(root: HTMLElement, reports: IterationReport[]): void {
  root.replaceChildren();
  root.append(el("h2", undefined, "iteration progress"));
  if (reports.length === 0) {
    root.append(el("p", "empty-state", "no iterations yet"));
    return;
  }
  const table = el("table", "progress");
  const head = el("tr");
  for (const title of ["iteration", "disagreement rate", "audited", "converged"]) {
    head.append(el("th", undefined, title));
  }
  table.append(head);
  for (const report of reports) {
    const row = el("tr", "report-row");
    row.append(el("td", undefined, String(report.iteration)));
    row.append(el("td", undefined, formatRate(report.disagreement_rate)));
    row.append(el("td", undefined, String(report.audited_count)));
    row.append(el("td", undefined, report.converged ? "yes" : "no"));
    table.append(row);
  }
  root.append(table);
}

/** Wires the router, the API client and the annotation editing state. */
export function main(root: HTMLElement, api: AuditApi = new AuditApi("")): void {
  const auditorInput = document.getElementById("auditor-id") as HTMLInputElement | null;
  if (auditorInput) {
    auditorInput.value = localStorage.getItem("auditor_id") ?? "";
    auditorInput.addEventListener("change", () => {
      localStorage.setItem("auditor_id", auditorInput.value.trim());
    });
  }

  let filter: ItemStatus | "open" = "open";
  let editing: { id: string; state: AnnotationState } | null = null;

  const showError = (error: unknown) => {
    root.replaceChildren();
    const message = error instanceof Error ? error.message : String(error);
    root.append(el("p", "error", `request failed: ${message}`));
    const retry = el("button", "retry", "retry");
    retry.addEventListener("click", () => route());
    root.append(retry);
  };

  async function showQueue(): Promise<void> {
    try {
      const items = await api.queue();
      renderQueue(root, items, filter, (id) => {
        window.location.hash = `#/item/${id}`;
      }, (next) => {
        filter = next;
        void showQueue();
      });
    } catch (error) {
      showError(error);
    }
  }

  async function showItem(id: string): Promise<void> {
    let item: AuditItem;
    try {
      item = await api.item(id);
    } catch (error) {
      showError(error);
      return;
    }
    if (!editing || editing.id !== id) {
      editing = { id, state: { edited: [...item.predicted_tags], notice: null, retry: null } };
    }
    const state = editing.state;

    const rerender = () =>
      renderAnnotation(root, item, state, {
        onChange(index, tag) {
          state.edited[index] = tag;
          state.notice = null;
          state.retry = null;
          rerender();
        },
        onCopy(source) {
          state.edited = [...(source === "stored" ? item.stored_tags : item.predicted_tags)];
          rerender();
        },
        onSkip() {
          editing = null;
          window.location.hash = "#/queue";
        },
        onSubmit() {
          void submit();
        },
      });

    const submit = async () => {
      const auditor = (localStorage.getItem("auditor_id") ?? "").trim();
      if (!auditor) {
        state.notice = "set your auditor id first";
        state.retry = null;
        rerender();
        return;
      }
      try {
        const updated = await api.submitDecision(id, auditor, state.edited, item.version);
        editing = null;
        item = updated;
        state.notice = `recorded: item is now ${statusLabel(updated.status)}`;
        state.retry = null;
        renderAnnotation(root, updated, { ...state, edited: [...state.edited] }, {
          onChange: () => undefined,
          onCopy: () => undefined,
          onSkip: () => {
            window.location.hash = "#/queue";
          },
          onSubmit: () => undefined,
        });
      } catch (error) {
        if (error instanceof ApiError) {
          state.notice = `${error.code}: ${error.message}`;
          state.retry = null;
          if (error.code === "VersionConflict") {
            // someone else acted on this item: reload it, keep the edits
            state.notice += " — reloaded the item, review and resubmit";
            try {
              item = await api.item(id);
            } catch {
              /* keep the stale view; the notice already explains */
            }
          }
        } else {
          // network failure: keep the annotation, offer a retry
          state.notice = "network failure — your annotation was kept";
          state.retry = () => void submit();
        }
        rerender();
      }
    };

    rerender();
  }

  async function showProgress(): Promise<void> {
    try {
      renderProgress(root, await api.progress());
    } catch (error) {
      showError(error);
    }
  }

  function route(): void {
    const hash = window.location.hash || "#/queue";
    const match = /^#\/item\/(.+)$/.exec(hash);
    if (match) {
      void showItem(match[1]!);
    } else if (hash === "#/progress") {
      void showProgress();
    } else {
      void showQueue();
    }
  }

  window.addEventListener("hashchange", route);
  route();
}
