/**
 * Pure DOM builders for the triage views. Every value a reviewer reads
 * (cell values, scores, distances, heights) is assigned via textContent
 * straight from the served string, so what is on screen is byte-equal to
 * what the service sent.
 */

import type {
  CellJson,
  ClusterTree,
  DiffResponse,
  SessionSnapshot,
  TableResponse,
} from "./types.js";

function el(tag: string, className?: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  if (className !== undefined) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

/**
 * The session panel: bundle header, revision, ranked sample, clusters with
 * their representativeness scores, and rejection lists. Re-rendered from a
 * fresh snapshot after every feedback round trip.
 */
export function render_sample(snapshot: SessionSnapshot): HTMLElement {
  const root = el("section", "session");
  root.dataset.revision = String(snapshot.revision);

  const header = el("header", "session-header");
  header.appendChild(el("h1", "bundle-name", snapshot.bundle.name));
  header.appendChild(el("span", "bundle-region", snapshot.bundle.region));
  header.appendChild(el("span", "bundle-failing-test", snapshot.bundle.failing_test));
  header.appendChild(el("span", "session-policy", snapshot.policy));
  header.appendChild(el("span", "session-revision", `revision ${snapshot.revision}`));
  root.appendChild(header);

  if (snapshot.accepted !== null) {
    const banner = el("div", "accepted-banner", `accepted ${snapshot.accepted}`);
    banner.dataset.patch = snapshot.accepted;
    root.appendChild(banner);
  }

  const ranked = el("ol", "ranked-list");
  for (const entry of snapshot.ranked) {
    const item = el("li", "ranked-row");
    item.dataset.patch = entry.patch_id;
    if (entry.cluster_id !== null) item.dataset.cluster = entry.cluster_id;
    item.appendChild(el("span", "rank", String(entry.rank)));
    item.appendChild(el("span", "patch-id", entry.patch_id));
    item.appendChild(el("span", "cluster-id", entry.cluster_id ?? ""));
    item.appendChild(el("span", "distance", String(entry.distance)));
    item.appendChild(el("span", entry.traced ? "traced" : "pending", entry.traced ? "traced" : "tracing"));
    ranked.appendChild(item);
  }
  root.appendChild(ranked);

  const clusters = el("ul", "cluster-list");
  for (const cluster of snapshot.clusters) {
    const item = el("li", "cluster");
    item.dataset.cluster = cluster.id;
    item.appendChild(el("span", "cluster-name", cluster.id));
    item.appendChild(el("span", "cluster-centroid", cluster.centroid));
    const members = el("ul", "cluster-members");
    for (const member of cluster.members) {
      const row = el("li", "cluster-member");
      row.dataset.patch = member;
      row.appendChild(el("span", "member-id", member));
      row.appendChild(el("span", "member-score", cluster.scores[member] ?? ""));
      members.appendChild(row);
    }
    item.appendChild(members);
    clusters.appendChild(item);
  }
  root.appendChild(clusters);

  root.appendChild(rejectedList("rejected-patches", snapshot.rejected_patches));
  root.appendChild(rejectedList("rejected-clusters", snapshot.rejected_clusters));
  return root;
}

function rejectedList(className: string, ids: string[]): HTMLElement {
  const list = el("ul", className);
  for (const id of ids) {
    list.appendChild(el("li", "rejected-id", id));
  }
  return list;
}

function cellsDiffer(a: CellJson | null, b: CellJson | null): boolean {
  if (a === null || b === null) return a !== b;
  return a.type !== b.type || a.value !== b.value;
}

/**
 * The per-patch comparison table. Column 0 is the unpatched run; a patch
 * cell whose serialized value differs from the buggy cell (absence counts)
 * gets the "divergent" class, and the row the service named as the first
 * divergence gets "first-divergence".
 */
export function renderTable(response: TableResponse): HTMLElement {
  const root = el("section", "table-panel");
  root.dataset.patch = response.patch_id;
  root.dataset.status = response.status;

  if (response.status !== "ready" || response.table === null) {
    root.appendChild(el("p", "table-computing", "trace still computing"));
    return root;
  }
  const table = response.table;

  const grid = el("table", "compare-table");
  const head = el("tr", "compare-head");
  for (const title of ["site", "kind", "label", "occ", ...table.columns]) {
    head.appendChild(el("th", undefined, title));
  }
  grid.appendChild(head);

  table.rows.forEach((row, rowIndex) => {
    if (row.elided_before !== undefined && row.elided_before > 0) {
      const marker = el("tr", "elision");
      const cell = el("td", undefined, `(${row.elided_before} rows elided)`);
      cell.setAttribute("colspan", String(4 + table.columns.length));
      marker.appendChild(cell);
      grid.appendChild(marker);
    }

    const tr = el("tr", "compare-row");
    tr.dataset.row = String(rowIndex);
    const [file, line] = row.location;
    tr.appendChild(el("td", "site", `${file}:${line}`));
    tr.appendChild(el("td", "kind", row.kind));
    tr.appendChild(el("td", "label", row.label));
    tr.appendChild(el("td", "occ", String(row.occurrence)));

    const buggyCell = row.cells[0] ?? null;
    table.columns.forEach((column, colIndex) => {
      const cell = row.cells[colIndex] ?? null;
      const td = el("td", "cell");
      td.dataset.column = column;
      if (cell === null) {
        td.classList.add("absent");
        td.textContent = "-";
      } else {
        td.textContent = cell.value;
        td.dataset.type = cell.type;
      }
      if (colIndex > 0 && cellsDiffer(buggyCell, cell)) {
        td.classList.add("divergent");
      }
      tr.appendChild(td);
    });

    for (const [column, divergenceIndex] of Object.entries(table.first_divergence)) {
      if (divergenceIndex === rowIndex) {
        tr.classList.add("first-divergence");
        tr.dataset.firstDivergenceOf = column;
      }
    }
    grid.appendChild(tr);
  });

  root.appendChild(grid);
  return root;
}

/**
 * Token diff of the buggy region against one replacement.
 */
export function renderDiff(response: DiffResponse): HTMLElement {
  const root = el("section", "diff-panel");
  root.dataset.patch = response.patch_id;
  root.appendChild(el("span", "diff-distance", String(response.distance)));

  const stream = el("p", "diff-tokens");
  for (const op of response.ops) {
    const token = el("span", `tok ${op.op}`);
    token.textContent = op.op === "del" ? (op.a ?? "") : (op.b ?? "");
    if (op.a !== null) token.dataset.a = op.a;
    if (op.b !== null) token.dataset.b = op.b;
    stream.appendChild(token);
    stream.appendChild(document.createTextNode(" "));
  }
  root.appendChild(stream);
  return root;
}

/**
 * Dendrogram listing: one row per merge node, leaves included.
 */
export function renderClusterTree(tree: ClusterTree): HTMLElement {
  const root = el("section", "dendrogram");
  const list = el("ul", "dendro-nodes");
  for (const node of tree.nodes) {
    const item = el("li", "dendro-node");
    item.dataset.node = String(node.id);
    if (tree.expanded.includes(node.id)) item.classList.add("expanded");
    item.appendChild(el("span", "dendro-height", node.height));
    item.appendChild(el("span", "dendro-members", node.members.join(" ")));
    list.appendChild(item);
  }
  root.appendChild(list);
  return root;
}
