/** Review queue: pending records oldest first, with accept/reject shortcuts
 * and navigation into the record editor. */

import { ApiClient, ApiError } from "../api.js";
import { clear, el, num } from "../dom.js";
import type { QueueItem } from "../types.js";

const PAGE_SIZE = 25;

export class QueueView {
  private offset = 0;
  private totalPending = 0;
  readonly root: HTMLElement;
  private readonly banner: HTMLElement;
  private readonly body: HTMLElement;

  constructor(
    private readonly client: ApiClient,
    private readonly openRecord: (item: QueueItem) => void,
  ) {
    this.banner = el("div", { class: "banner", role: "status" });
    this.body = el("div", { class: "queue-body" });
    this.root = el("section", { class: "queue-view" }, [
      el("h2", { text: "Review queue" }),
      this.banner,
      this.body,
    ]);
  }

  async load(offset = this.offset): Promise<void> {
    this.offset = Math.max(0, offset);
    clear(this.body);
    this.body.append(el("p", { class: "loading", text: "Loading queue..." }));
    try {
      const page = await this.client.fetchQueue(PAGE_SIZE, this.offset);
      this.totalPending = page.total_pending;
      this.render(page.items);
    } catch (err) {
      this.renderError(err);
    }
  }

  private renderError(err: unknown): void {
    clear(this.body);
    const message = err instanceof Error ? err.message : String(err);
    const retry = el("button", { class: "retry", text: "Retry" });
    retry.addEventListener("click", () => void this.load());
    this.body.append(
      el("p", { class: "error", text: `Could not load the queue: ${message}` }),
      retry,
    );
  }

  private render(items: QueueItem[]): void {
    clear(this.body);
    if (items.length === 0) {
      this.body.append(el("p", { class: "empty-state", text: "No pending records. All caught up." }));
      return;
    }
    const table = el("table", { class: "queue-table" }, [
      el("thead", {}, [
        el("tr", {}, [
          el("th", { text: "ID" }),
          el("th", { text: "Formula" }),
          el("th", { text: "Class" }),
          el("th", { text: "Capacity (wt.%)" }),
          el("th", { text: "DOI" }),
          el("th", { text: "Status" }),
          el("th", { text: "Actions" }),
        ]),
      ]),
    ]);
    const tbody = el("tbody");
    for (const item of items) {
      tbody.append(this.row(item));
    }
    table.append(tbody);
    this.body.append(table);

    const pages = el("div", { class: "pager" });
    if (this.offset > 0) {
      const prev = el("button", { text: "Previous" });
      prev.addEventListener("click", () => void this.load(this.offset - PAGE_SIZE));
      pages.append(prev);
    }
    if (this.offset + PAGE_SIZE < this.totalPending) {
      const next = el("button", { text: "Next" });
      next.addEventListener("click", () => void this.load(this.offset + PAGE_SIZE));
      pages.append(next);
    }
    pages.append(el("span", { class: "pager-total", text: `${this.totalPending} pending` }));
    this.body.append(pages);
  }

  private row(item: QueueItem): HTMLElement {
    const status = el("span", { class: `status status-${item.review_status}`, text: item.review_status });
    const accept = el("button", { class: "accept", text: "Accept" });
    const reject = el("button", { class: "reject", text: "Reject" });
    const open = el("button", { class: "open", text: "Open" });
    const tr = el("tr", { "data-record-id": String(item.id) }, [
      el("td", { text: String(item.id) }),
      el("td", { class: "formula", text: item.formula }),
      el("td", { text: item.material_class ?? "" }),
      el("td", { class: "capacity", text: num(item.capacity_wt_pct) }),
      el("td", { text: item.provenance.doi }),
      el("td", {}, [status]),
      el("td", {}, [accept, reject, open]),
    ]);

    const act = async (action: "accept" | "reject") => {
      const optimistic = action === "accept" ? "accepted" : "rejected";
      status.textContent = optimistic; // optimistic flip
      status.className = `status status-${optimistic}`;
      accept.disabled = true;
      reject.disabled = true;
      try {
        const updated = await this.client.submitReview(item.id, action);
        status.textContent = updated.review_status; // reconcile with server
        status.className = `status status-${updated.review_status}`;
        tr.classList.add("reconciled");
      } catch (err) {
        if (err instanceof ApiError && err.status === 409) {
          this.showBanner(`Record ${item.id}: another reviewer acted first; showing the current state.`);
          const fresh = await this.client.getRecord(item.id).catch(() => null);
          status.textContent = fresh ? fresh.review_status : item.review_status;
          status.className = `status status-${status.textContent}`;
        } else {
          status.textContent = item.review_status; // roll the optimism back
          status.className = `status status-${item.review_status}`;
          accept.disabled = false;
          reject.disabled = false;
          this.showBanner(err instanceof Error ? err.message : String(err));
        }
      }
    };

    accept.addEventListener("click", () => void act("accept"));
    reject.addEventListener("click", () => void act("reject"));
    open.addEventListener("click", () => this.openRecord(item));
    return tr;
  }

  showBanner(message: string): void {
    this.banner.textContent = message;
    this.banner.classList.add("visible");
  }
}
