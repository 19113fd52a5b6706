/** Record detail and correction form. Edits are validated client-side with
 * the same grammar rules the server enforces; nothing is sent until the
 * form is clean, and the rendered values after a save are the server's
 * canonical ones. */

import { ApiClient, ApiError } from "../api.js";
import { clear, el, num } from "../dom.js";
import type { DescriptiveBlock, RecordEdit, RecordPayload } from "../types.js";
import { MATERIAL_CLASSES, QUANTITY_FIELDS, validateEdit } from "../validate.js";

export class DetailView {
  readonly root: HTMLElement;
  private readonly banner: HTMLElement;
  private readonly body: HTMLElement;
  private record: RecordPayload | null = null;
  private context: DescriptiveBlock[] | null = null;

  constructor(private readonly client: ApiClient, private readonly onBack: () => void) {
    this.banner = el("div", { class: "banner", role: "status" });
    this.body = el("div", { class: "detail-body" });
    this.root = el("section", { class: "detail-view" }, [this.banner, this.body]);
  }

  async load(id: number, context: DescriptiveBlock[] | null = null): Promise<void> {
    this.context = context;
    clear(this.body);
    this.body.append(el("p", { class: "loading", text: `Loading record ${id}...` }));
    try {
      this.record = await this.client.getRecord(id);
      this.render();
    } catch (err) {
      clear(this.body);
      const retry = el("button", { class: "retry", text: "Retry" });
      retry.addEventListener("click", () => void this.load(id, context));
      this.body.append(
        el("p", { class: "error", text: err instanceof Error ? err.message : String(err) }),
        retry,
      );
    }
  }

  private render(): void {
    const record = this.record;
    if (!record) return;
    clear(this.body);

    const back = el("button", { class: "back", text: "Back to queue" });
    back.addEventListener("click", () => this.onBack());
    const status = el("span", {
      class: `status status-${record.review_status}`,
      text: record.review_status,
    });
    this.body.append(el("div", { class: "detail-header" }, [
      back,
      el("h2", { text: `Record ${record.id}` }),
      status,
      el("span", { class: "doi", text: record.provenance.doi }),
    ]));

    const form = el("form", { class: "record-form" });
    form.addEventListener("submit", (event) => event.preventDefault());

    const inputs = new Map<string, HTMLInputElement | HTMLSelectElement>();
    const errors = new Map<string, HTMLElement>();

    const fieldRow = (key: string, label: string, control: HTMLInputElement | HTMLSelectElement) => {
      control.setAttribute("name", key);
      const error = el("span", { class: "field-error", "data-field": key });
      inputs.set(key, control);
      errors.set(key, error);
      form.append(el("label", { class: "field" }, [
        el("span", { class: "field-label", text: label }),
        control,
        error,
      ]));
    };

    const formulaInput = el("input", { type: "text", value: record.formula });
    fieldRow("formula", "Formula", formulaInput);

    const classSelect = el("select");
    classSelect.append(el("option", { value: "", text: "(unspecified)" }));
    for (const cls of MATERIAL_CLASSES) {
      const option = el("option", { value: cls, text: cls });
      if (record.material_class === cls) option.setAttribute("selected", "selected");
      classSelect.append(option);
    }
    fieldRow("material_class", "Material class", classSelect);

    for (const { key, label } of QUANTITY_FIELDS) {
      const value = record[key as keyof RecordPayload] as number | null;
      fieldRow(key, label, el("input", { type: "text", value: num(value) }));
    }
    const notesInput = el("input", { type: "text", value: record.notes });
    fieldRow("notes", "Notes", notesInput);

    const accept = el("button", { class: "accept", text: "Accept" });
    const reject = el("button", { class: "reject", text: "Reject" });
    const save = el("button", { class: "save", text: "Save correction" });
    form.append(el("div", { class: "actions" }, [accept, reject, save]));
    this.body.append(form);

    if (this.context && this.context.length > 0) {
      const panel = el("div", { class: "context-panel" }, [
        el("h3", { text: "Extracted figure data" }),
      ]);
      for (const block of this.context) {
        panel.append(el("div", { class: "context-block" }, [
          el("strong", { text: `${block.figure_id} (${block.class})` }),
          el("pre", { text: block.text }),
        ]));
      }
      this.body.append(panel);
    }

    const simpleAction = async (action: "accept" | "reject") => {
      const optimistic = action === "accept" ? "accepted" : "rejected";
      status.textContent = optimistic;
      status.className = `status status-${optimistic}`;
      try {
        const updated = await this.client.submitReview(record.id, action);
        this.record = updated;
        status.textContent = updated.review_status;
        status.className = `status status-${updated.review_status}`;
      } catch (err) {
        if (err instanceof ApiError && err.status === 409) {
          this.showBanner(`Another reviewer acted on record ${record.id}; reloaded the current state.`);
          await this.load(record.id, this.context);
        } else {
          status.textContent = record.review_status;
          status.className = `status status-${record.review_status}`;
          this.showBanner(err instanceof Error ? err.message : String(err));
        }
      }
    };
    accept.addEventListener("click", () => void simpleAction("accept"));
    reject.addEventListener("click", () => void simpleAction("reject"));

    save.addEventListener("click", () => void this.saveCorrection(inputs, errors));
  }

  private async saveCorrection(
    inputs: Map<string, HTMLInputElement | HTMLSelectElement>,
    errorSlots: Map<string, HTMLElement>,
  ): Promise<void> {
    const record = this.record;
    if (!record) return;
    const edit: Record<string, string> = {};
    for (const [key, control] of inputs) {
      edit[key] = control.value.trim();
    }
    const problems = validateEdit(edit);
    for (const [key, slot] of errorSlots) {
      slot.textContent = problems.get(key) ?? "";
    }
    if (problems.size > 0) {
      return; // nothing is sent while the form is invalid
    }
    const payload: RecordEdit = { formula: edit.formula ?? "" };
    if (edit.material_class) payload.material_class = edit.material_class;
    if (edit.notes) payload.notes = edit.notes;
    for (const { key } of QUANTITY_FIELDS) {
      const value = edit[key];
      if (value) payload[key] = value;
    }
    try {
      const updated = await this.client.submitReview(record.id, "correct", { record: payload });
      this.record = updated;
      this.showBanner(`Saved correction for record ${record.id}; audit trail updated.`);
      this.render();
    } catch (err) {
      if (err instanceof ApiError && err.code === "validation_failure" && Array.isArray(err.details)) {
        for (const detail of err.details as Array<{ field?: string; reason?: string }>) {
          const slot = detail.field && errorSlots.get(detail.field);
          if (slot) slot.textContent = detail.reason ?? "rejected by the server";
        }
      } else if (err instanceof ApiError && err.status === 409) {
        this.showBanner(`Another reviewer acted on record ${record.id}; reloaded the current state.`);
        await this.load(record.id, this.context);
      } else {
        this.showBanner(err instanceof Error ? err.message : String(err));
      }
    }
  }

  showBanner(message: string): void {
    this.banner.textContent = message;
    this.banner.classList.add("visible");
  }
}
