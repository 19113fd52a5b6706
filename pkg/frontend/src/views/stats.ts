/** Stats dashboard: capacity histogram per material class and the most
 * frequent elements in a capacity window, straight off the /stats API. */

import { ApiClient } from "../api.js";
import { clear, el } from "../dom.js";

const DEFAULT_EDGES = [0, 2, 4, 6, 8, 10, 12];

export class StatsView {
  readonly root: HTMLElement;
  private readonly histogramBody: HTMLElement;
  private readonly elementsBody: HTMLElement;
  private readonly edgesInput: HTMLInputElement;
  private readonly loInput: HTMLInputElement;
  private readonly hiInput: HTMLInputElement;

  constructor(private readonly client: ApiClient) {
    this.edgesInput = el("input", { type: "text", value: DEFAULT_EDGES.join(","), name: "edges" });
    this.loInput = el("input", { type: "text", value: "0", name: "lo", class: "narrow" });
    this.hiInput = el("input", { type: "text", value: "12", name: "hi", class: "narrow" });
    this.histogramBody = el("div", { class: "histogram" });
    this.elementsBody = el("div", { class: "top-elements" });

    const refresh = el("button", { text: "Refresh" });
    refresh.addEventListener("click", () => void this.load());

    this.root = el("section", { class: "stats-view" }, [
      el("h2", { text: "Database statistics" }),
      el("div", { class: "stats-controls" }, [
        el("label", {}, [el("span", { text: "Capacity bin edges (wt.%)" }), this.edgesInput]),
        el("label", {}, [el("span", { text: "Element window low" }), this.loInput]),
        el("label", {}, [el("span", { text: "high" }), this.hiInput]),
        refresh,
      ]),
      el("h3", { text: "Capacity distribution by class" }),
      this.histogramBody,
      el("h3", { text: "Most frequent elements" }),
      this.elementsBody,
    ]);
  }

  async load(): Promise<void> {
    clear(this.histogramBody);
    clear(this.elementsBody);
    this.histogramBody.append(el("p", { class: "loading", text: "Loading..." }));
    let edges: number[];
    try {
      edges = this.edgesInput.value.split(",").map((e) => Number(e.trim()));
      if (edges.some((e) => Number.isNaN(e))) throw new Error("edges must be numbers");
    } catch (err) {
      clear(this.histogramBody);
      this.histogramBody.append(el("p", { class: "error", text: String(err) }));
      return;
    }
    try {
      const [hist, elems] = await Promise.all([
        this.client.histogram(edges),
        this.client.elements(Number(this.loInput.value), Number(this.hiInput.value)),
      ]);
      clear(this.histogramBody);
      this.histogramBody.append(this.renderHistogram(hist.edges, hist.counts));
      clear(this.elementsBody);
      this.elementsBody.append(this.renderElements(elems.elements));
    } catch (err) {
      clear(this.histogramBody);
      const retry = el("button", { class: "retry", text: "Retry" });
      retry.addEventListener("click", () => void this.load());
      this.histogramBody.append(
        el("p", { class: "error", text: err instanceof Error ? err.message : String(err) }),
        retry,
      );
    }
  }

  private renderHistogram(edges: number[], counts: Record<string, number[]>): HTMLElement {
    const classes = Object.keys(counts).sort();
    if (classes.length === 0) {
      return el("p", { class: "empty-state", text: "No capacity values recorded yet." });
    }
    const maxCount = Math.max(1, ...classes.flatMap((c) => counts[c] ?? []));
    const header = el("tr", {}, [el("th", { text: "Class" })]);
    for (let k = 0; k + 1 < edges.length; k += 1) {
      header.append(el("th", { text: `[${edges[k]}, ${edges[k + 1]})` }));
    }
    const table = el("table", { class: "histogram-table" }, [el("thead", {}, [header])]);
    const tbody = el("tbody");
    for (const cls of classes) {
      const row = el("tr", {}, [el("td", { text: cls })]);
      for (const count of counts[cls] ?? []) {
        const bar = el("div", { class: "bar" });
        bar.style.width = `${Math.round((count / maxCount) * 100)}%`;
        row.append(el("td", { class: "bin" }, [bar, el("span", { text: String(count) })]));
      }
      tbody.append(row);
    }
    table.append(tbody);
    return table;
  }

  private renderElements(elements: Array<{ element: string; count: number }>): HTMLElement {
    if (elements.length === 0) {
      return el("p", { class: "empty-state", text: "No records in this window." });
    }
    const table = el("table", { class: "elements-table" }, [
      el("thead", {}, [el("tr", {}, [el("th", { text: "Element" }), el("th", { text: "Records" })])]),
    ]);
    const tbody = el("tbody");
    for (const entry of elements) {
      tbody.append(el("tr", {}, [
        el("td", { text: entry.element }),
        el("td", { text: String(entry.count) }),
      ]));
    }
    table.append(tbody);
    return table;
  }
}
