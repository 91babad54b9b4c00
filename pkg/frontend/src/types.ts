/**
 * Wire types for the triage service. Field names and shapes mirror the
 * server's JSON exactly; values the reviewer reads (cell values, scores,
 * distances, dendrogram heights) arrive as strings or ints and are rendered
 * verbatim.
 */

export interface BundleInfo {
  name: string;
  path: string;
  region: string;
  failing_test: string;
}

export interface RankedRow {
  rank: number;
  patch_id: string;
  cluster_id: string | null;
  distance: number;
  traced: boolean;
}

export interface ClusterInfo {
  id: string;
  centroid: string;
  members: string[];
  /** member id -> exact mean intra-cluster distance, e.g. "10/3" */
  scores: Record<string, string>;
}

export interface SessionSnapshot {
  tool_version: string;
  revision: number;
  bundle: BundleInfo;
  policy: string;
  centroid_mode: string;
  clustering: boolean;
  row_budget: number;
  frozen: boolean;
  accepted: string | null;
  ranked: RankedRow[];
  clusters: ClusterInfo[];
  rejected_patches: string[];
  rejected_clusters: string[];
}

export interface DendroNode {
  id: number;
  members: string[];
  height: string;
  left: number | null;
  right: number | null;
}

export interface ClusterTree {
  clustering: boolean;
  revision: number;
  expanded: number[];
  nodes: DendroNode[];
}

export interface RowKey {
  file: string;
  line: number;
  col: number;
  label: string;
  kind: string;
  occurrence: number;
}

export interface CellJson {
  type: string;
  value: string;
}

export interface TableRowJson {
  /** [file, line, col] */
  location: [string, number, number];
  label: string;
  kind: string;
  occurrence: number;
  /** array-aligned to columns; null = this variant never produced the row */
  cells: (CellJson | null)[];
  elided_before?: number;
}

export interface TableJson {
  columns: string[];
  rows: TableRowJson[];
  /** patch column -> row index of its first divergence, or null */
  first_divergence: Record<string, number | null>;
}

export interface TableResponse {
  patch_id: string;
  status: "ready" | "computing";
  revision: number;
  table: TableJson | null;
  full_row_count: number | null;
  /** keyed against the full table, not just the summary slice */
  first_divergence: RowKey | null;
  truncated: boolean | null;
}

export interface DiffOp {
  op: "equal" | "sub" | "ins" | "del";
  a: string | null;
  b: string | null;
}

export interface DiffResponse {
  patch_id: string;
  buggy_text: string;
  replacement_text: string;
  original_rank: number;
  distance: number;
  ops: DiffOp[];
}

export type FeedbackAction =
  | "reject_patch"
  | "reject_cluster"
  | "expand_cluster"
  | "accept_patch";

export interface FeedbackResponse {
  revision: number;
  frozen: boolean;
  accepted: string | null;
  ranked: RankedRow[];
}

export interface ErrorBody {
  error: string;
  revision?: number;
}
