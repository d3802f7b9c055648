// DOM wiring: builds the page inside a root element, keeps UiState in sync,
// and funnels every service call through one ApiClient. Only one predict
// request is ever in flight; a newer request aborts the older one.

import { ApiClient, ApiError, type PredictParams, type TechniqueInfo } from "./api";
import {
  addTechnique,
  clearError,
  formatScore,
  initialState,
  removeTechnique,
  setError,
  setFilter,
  setK,
  setPredictions,
  setSimilarity,
  setSortKey,
  visibleRows,
  type SortKey,
  type UiState,
} from "./state";

const SORT_COLUMNS: Array<{ key: SortKey; label: string }> = [
  { key: "rank", label: "Rank" },
  { key: "id", label: "Technique" },
  { key: "score", label: "Score" },
];

export class App {
  state: UiState = initialState();
  private catalog: TechniqueInfo[] = [];
  private inflight: AbortController | null = null;
  private readonly root: HTMLElement;

  constructor(
    root: HTMLElement,
    private readonly client: ApiClient,
  ) {
    this.root = root;
    this.root.innerHTML = `
      <header>
        <h1>Technique Inference</h1>
        <p id="model-info" class="muted"></p>
      </header>
      <div id="error-banner" class="banner" hidden></div>
      <section class="controls">
        <form id="add-form">
          <input id="technique-input" list="technique-options" autocomplete="off"
                 placeholder="Technique id or name" aria-label="technique" />
          <datalist id="technique-options"></datalist>
          <button id="add-button" type="submit">Add technique</button>
        </form>
        <div id="observed-list" class="chips"></div>
        <div class="row">
          <label>Results <input id="k-input" type="number" min="1" value="20" /></label>
          <label>Similarity
            <select id="similarity-select">
              <option value="">model default</option>
              <option value="dot">dot</option>
              <option value="cosine">cosine</option>
            </select>
          </label>
          <input id="filter-input" placeholder="Filter predictions" />
          <button id="export-csv" disabled>Download CSV</button>
          <button id="export-navigator" disabled>Download Navigator layer</button>
        </div>
      </section>
      <p id="prompt" class="muted">Add one or more observed techniques to see inferences.</p>
      <table id="prediction-table" hidden>
        <thead><tr></tr></thead>
        <tbody></tbody>
      </table>
    `;
    const headRow = this.root.querySelector("thead tr")!;
    for (const col of SORT_COLUMNS) {
      const th = document.createElement("th");
      const button = document.createElement("button");
      button.textContent = col.label;
      button.dataset.sort = col.key;
      button.addEventListener("click", () => this.update(setSortKey(this.state, col.key)));
      th.appendChild(button);
      headRow.appendChild(th);
    }
    const nameTh = document.createElement("th");
    nameTh.textContent = "Name";
    headRow.insertBefore(nameTh, headRow.children[2]);

    this.el<HTMLFormElement>("#add-form").addEventListener("submit", (event) => {
      event.preventDefault();
      void this.onAdd();
    });
    this.el<HTMLInputElement>("#filter-input").addEventListener("input", (event) => {
      this.update(setFilter(this.state, (event.target as HTMLInputElement).value));
    });
    this.el<HTMLInputElement>("#k-input").addEventListener("change", (event) => {
      const k = Number((event.target as HTMLInputElement).value);
      this.update(setK(this.state, k));
      void this.refreshPredictions();
    });
    this.el<HTMLSelectElement>("#similarity-select").addEventListener("change", (event) => {
      const value = (event.target as HTMLSelectElement).value;
      this.update(setSimilarity(this.state, value === "" ? null : (value as "dot" | "cosine")));
      void this.refreshPredictions();
    });
    this.el<HTMLButtonElement>("#export-csv").addEventListener("click", () => {
      void this.download("csv");
    });
    this.el<HTMLButtonElement>("#export-navigator").addEventListener("click", () => {
      void this.download("navigator");
    });
  }

  el<T extends HTMLElement>(selector: string): T {
    return this.root.querySelector(selector) as T;
  }

  async start(): Promise<void> {
    try {
      const [catalog, info] = await Promise.all([
        this.client.techniques(),
        this.client.modelInfo(),
      ]);
      this.catalog = catalog;
      const options = this.el<HTMLDataListElement>("#technique-options");
      options.innerHTML = "";
      for (const entry of catalog) {
        const option = document.createElement("option");
        option.value = entry.id;
        if (entry.name) option.label = entry.name;
        options.appendChild(option);
      }
      this.el<HTMLElement>("#model-info").textContent =
        `${info.trained_by} model, d=${info.d}, ${info.m} reports x ${info.n} techniques, ` +
        `default similarity ${info.similarity}`;
      this.update(clearError(this.state));
    } catch (error) {
      this.update(setError(this.state, describe(error)));
    }
  }

  onAdd(input?: string): Promise<void> {
    const field = this.el<HTMLInputElement>("#technique-input");
    const raw = (input ?? field.value).trim();
    if (!raw) return Promise.resolve();
    const match = this.catalog.find(
      (t) => t.id === raw || (t.name ?? "").toLowerCase() === raw.toLowerCase(),
    );
    if (!match) {
      this.update(setError(this.state, `Unknown technique: ${raw}`));
      return Promise.resolve();
    }
    const isNew = !this.state.observed.includes(match.id);
    field.value = "";
    if (!isNew) return Promise.resolve(); // duplicate add is a no-op
    this.update(addTechnique(clearError(this.state), match.id));
    return this.refreshPredictions();
  }

  onRemove(id: string): Promise<void> {
    const next = removeTechnique(this.state, id);
    const changed = next !== this.state;
    this.update(next);
    if (changed && next.observed.length > 0) return this.refreshPredictions();
    return Promise.resolve();
  }

  private predictParams(): PredictParams {
    return {
      observed: [...this.state.observed],
      k: this.state.k,
      similarity: this.state.similarity,
    };
  }

  refreshPredictions(): Promise<void> {
    if (this.state.observed.length === 0) return Promise.resolve();
    this.inflight?.abort();
    const controller = new AbortController();
    this.inflight = controller;
    return this.client
      .predict(this.predictParams(), controller.signal)
      .then((resp) => {
        if (controller.signal.aborted) return;
        this.update(setPredictions(this.state, resp));
      })
      .catch((error: unknown) => {
        if (controller.signal.aborted) return; // superseded by a newer request
        this.update(setError(this.state, describe(error)));
      })
      .finally(() => {
        if (this.inflight === controller) this.inflight = null;
      });
  }

  // Exports always cover the full prediction set for the current observed
  // techniques, not the filtered view.
  async download(kind: "csv" | "navigator"): Promise<void> {
    try {
      const params = this.predictParams();
      const buffer =
        kind === "csv"
          ? await this.client.exportCsv(params)
          : await this.client.exportNavigator(params, "inferred-techniques");
      const filename = kind === "csv" ? "predictions.csv" : "navigator-layer.json";
      const type = kind === "csv" ? "text/csv" : "application/json";
      triggerDownload(new Blob([buffer], { type }), filename);
    } catch (error) {
      this.update(setError(this.state, describe(error)));
    }
  }

  update(next: UiState): void {
    this.state = next;
    this.render();
  }

  private render(): void {
    const banner = this.el<HTMLElement>("#error-banner");
    banner.hidden = this.state.error === null;
    banner.textContent = this.state.error ?? "";

    const chips = this.el<HTMLElement>("#observed-list");
    chips.innerHTML = "";
    for (const id of this.state.observed) {
      const chip = document.createElement("span");
      chip.className = "chip";
      chip.textContent = id;
      const remove = document.createElement("button");
      remove.textContent = "x";
      remove.setAttribute("aria-label", `remove ${id}`);
      remove.addEventListener("click", () => void this.onRemove(id));
      chip.appendChild(remove);
      chips.appendChild(chip);
    }

    const table = this.el<HTMLTableElement>("#prediction-table");
    const prompt = this.el<HTMLElement>("#prompt");
    const hasRows = this.state.predictions !== null;
    table.hidden = !hasRows;
    prompt.hidden = hasRows;
    table.classList.toggle("stale", this.state.stale);

    const exportable = hasRows && this.state.predictions!.predictions.length > 0;
    this.el<HTMLButtonElement>("#export-csv").disabled = !exportable;
    this.el<HTMLButtonElement>("#export-navigator").disabled = !exportable;

    const tbody = table.querySelector("tbody")!;
    tbody.innerHTML = "";
    for (const p of visibleRows(this.state)) {
      const tr = document.createElement("tr");
      const name = p.technique_name ?? "";
      tr.innerHTML = `<td>${p.rank}</td><td>${p.technique_id}</td><td></td><td>${formatScore(p.score)}</td>`;
      (tr.children[2] as HTMLElement).textContent = name;
      tbody.appendChild(tr);
    }
  }
}

function describe(error: unknown): string {
  if (error instanceof ApiError) return `${error.message} (${error.code})`;
  if (error instanceof Error) return `Service unreachable: ${error.message}`;
  return "Service unreachable";
}

function triggerDownload(blob: Blob, filename: string): void {
  const url = URL.createObjectURL(blob);
  const anchor = document.createElement("a");
  anchor.href = url;
  anchor.download = filename;
  anchor.click();
  URL.revokeObjectURL(url);
}
