/** App shell: hash routing between the queue, record detail, and stats. */

import { ApiClient } from "./api.js";
import { clear, el } from "./dom.js";
import type { QueueItem } from "./types.js";
import { DetailView } from "./views/detail.js";
import { QueueView } from "./views/queue.js";
import { StatsView } from "./views/stats.js";

export class App {
  readonly queue: QueueView;
  readonly detail: DetailView;
  readonly stats: StatsView;
  private readonly main: HTMLElement;
  private contextCache = new Map<number, QueueItem["context"]>();

  constructor(private readonly root: HTMLElement, client: ApiClient) {
    this.queue = new QueueView(client, (item) => {
      this.contextCache.set(item.id, item.context);
      window.location.hash = `#/record/${item.id}`;
    });
    this.detail = new DetailView(client, () => {
      window.location.hash = "#/queue";
    });
    this.stats = new StatsView(client);
    this.main = el("main", { class: "app-main" });

    const nav = el("nav", { class: "app-nav" }, [
      el("a", { href: "#/queue", text: "Review queue" }),
      el("a", { href: "#/stats", text: "Statistics" }),
    ]);
    clear(root);
    root.append(
      el("header", { class: "app-header" }, [el("h1", { text: "Hydrogen storage data review" }), nav]),
      this.main,
    );
    window.addEventListener("hashchange", () => void this.route());
  }

  async route(): Promise<void> {
    const hash = window.location.hash || "#/queue";
    clear(this.main);
    const recordMatch = /^#\/record\/(\d+)$/.exec(hash);
    if (recordMatch) {
      this.main.append(this.detail.root);
      const id = Number(recordMatch[1]);
      await this.detail.load(id, this.contextCache.get(id) ?? null);
      return;
    }
    if (hash.startsWith("#/stats")) {
      this.main.append(this.stats.root);
      await this.stats.load();
      return;
    }
    this.main.append(this.queue.root);
    await this.queue.load();
  }
}

export function startApp(root: HTMLElement, client: ApiClient = new ApiClient("")): App {
  const app = new App(root, client);
  void app.route();
  return app;
}
