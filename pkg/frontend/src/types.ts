/** Shapes of the service JSON payloads the client consumes. */

export type ReviewStatus = "pending" | "accepted" | "corrected" | "rejected";

export interface Provenance {
  doi: string;
  figure_id: string | null;
  extraction_mode: "direct" | "dive" | "manual";
  model_tag: string;
  timestamp: string;
}

/** One record as served by GET /records and /review/queue (id included). */
export interface RecordPayload {
  id: number;
  formula: string;
  material_class: string | null;
  interstitial_subtype: string | null;
  capacity_wt_pct: number | null;
  volumetric_g_per_L: number | null;
  absorption_pressure_bar: number | null;
  desorption_pressure_bar: number | null;
  desorption_temperature_K: number | null;
  measurement_temperature_K: number | null;
  cycles: number | null;
  notes: string;
  provenance: Provenance;
  review_status: ReviewStatus;
}

export interface DescriptiveBlock {
  figure_id: string;
  class: string;
  confidence: number;
  text: string;
}

export interface QueueItem extends RecordPayload {
  context: DescriptiveBlock[] | null;
}

export interface QueuePage {
  items: QueueItem[];
  total_pending: number;
}

export interface HistogramPayload {
  edges: number[];
  counts: Record<string, number[]>;
}

export interface ElementCount {
  element: string;
  count: number;
}

export interface ElementsPayload {
  lo: number;
  hi: number;
  elements: ElementCount[];
}

export interface DopantEntry {
  element: string;
  count: number;
  capacity_wt_pct: number[];
  desorption_temperature_K: number[];
  absorption_pressure_bar: number[];
}

export interface ErrorPayload {
  code: string;
  message: string;
  details: unknown;
}

export type ReviewAction = "accept" | "reject" | "correct";

/** Flat editable fields sent back as a correction record; the server
 * re-parses quantity strings and re-validates everything. */
export interface RecordEdit {
  formula: string;
  [field: string]: string | undefined;
}
