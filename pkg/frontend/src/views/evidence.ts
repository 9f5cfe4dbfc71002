import { clear, el, svg } from "../dom.js";
import type { EvidenceResponse, SpanClass } from "../types.js";

const SPAN_CLASS_NAMES: Record<SpanClass, string> = {
  named_entity: "span-entity",        // blue
  evidence_supported: "span-supported", // green
  uncertain: "span-uncertain",        // orange
};

export interface EvidenceCallbacks {
  onEvidenceToggle?(excludedChunkIds: string[]): void;
}

/** Confidence-annotated answer plus the entity-to-chunk provenance graph.
 * Toggling an evidence chunk off re-requests annotations against the reduced
 * evidence set. */
export class EvidenceView {
  readonly root: HTMLElement;
  private data: EvidenceResponse | null = null;
  private excluded = new Set<string>();
  private answerPane: HTMLElement;
  private graphPane: SVGSVGElement;
  private togglePane: HTMLElement;

  constructor(private readonly callbacks: EvidenceCallbacks = {}) {
    this.root = el("div", { class: "evidence-view panel" });
    this.root.appendChild(el("h3", {}, "Evidence Traceability"));
    this.answerPane = el("p", { class: "annotated-answer" });
    this.root.appendChild(this.answerPane);
    this.togglePane = el("div", { class: "evidence-toggles" });
    this.root.appendChild(this.togglePane);
    this.graphPane = svg("svg", { class: "evidence-graph" });
    this.root.appendChild(this.graphPane);
  }

  setData(data: EvidenceResponse): void {
    this.data = data;
    this.render();
  }

  private render(): void {
    clear(this.answerPane);
    clear(this.togglePane);
    clear(this.graphPane);
    if (!this.data) return;
    const { annotated_answer: annotated, graph } = this.data;

    // answer text with classified spans; gaps between spans render as plain text
    let cursor = 0;
    const ordered = [...annotated.spans].sort((a, b) => a.start - b.start);
    for (const span of ordered) {
      if (span.start > cursor) {
        this.answerPane.appendChild(document.createTextNode(annotated.text.slice(cursor, span.start)));
      }
      const node = el("span", { class: SPAN_CLASS_NAMES[span.class] }, annotated.text.slice(span.start, span.end));
      if (span.supporting_chunk_ids.length) {
        node.setAttribute("data-support", span.supporting_chunk_ids.join(","));
        node.setAttribute("title", `supported by ${span.supporting_chunk_ids.join(", ")}`);
      }
      this.answerPane.appendChild(node);
      cursor = span.end;
    }
    if (cursor < annotated.text.length) {
      this.answerPane.appendChild(document.createTextNode(annotated.text.slice(cursor)));
    }

    // nodes are entities ∪ chunk ids; edges disambiguate, and isolated nodes
    // count as entities when they occur in the answer text
    const edgeEntities = new Set(graph.edges.map((e) => e.entity));
    const edgeChunks = new Set(graph.edges.map((e) => e.chunk_id));
    const lowerAnswer = annotated.text.toLowerCase();
    const chunkIds = graph.nodes.filter(
      (n) => edgeChunks.has(n) || (!edgeEntities.has(n) && !lowerAnswer.includes(n.toLowerCase())),
    );

    // evidence-set toggles
    for (const chunkId of chunkIds) {
      const label = el("label", { class: "evidence-toggle" });
      const box = el("input", { type: "checkbox", "data-chunk": chunkId });
      (box as HTMLInputElement).checked = !this.excluded.has(chunkId);
      box.addEventListener("change", () => {
        if ((box as HTMLInputElement).checked) this.excluded.delete(chunkId);
        else this.excluded.add(chunkId);
        this.callbacks.onEvidenceToggle?.([...this.excluded]);
      });
      label.append(box, el("span", {}, chunkId));
      this.togglePane.appendChild(label);
    }

    // bipartite entity -> chunk graph
    const allEntities = graph.nodes.filter((n) => !chunkIds.includes(n));
    const chunkRow = new Map(chunkIds.map((id, i) => [id, { x: 80 + i * 140, y: 140 }]));
    const entityRow = new Map(allEntities.map((name, i) => [name, { x: 80 + i * 140, y: 40 }]));
    const height = 180;
    const width = Math.max(chunkIds.length, allEntities.length) * 140 + 80;
    this.graphPane.setAttribute("viewBox", `0 0 ${width} ${height}`);
    this.graphPane.setAttribute("width", String(width));
    this.graphPane.setAttribute("height", String(height));

    for (const edge of graph.edges) {
      const from = entityRow.get(edge.entity);
      const to = chunkRow.get(edge.chunk_id);
      if (!from || !to) continue;
      this.graphPane.appendChild(
        svg("line", {
          class: "evidence-edge",
          x1: from.x, y1: from.y, x2: to.x, y2: to.y,
          stroke: "#2e9e5b",
          "stroke-width": (1 + edge.support_score * 2).toFixed(2),
          "stroke-opacity": edge.support_score.toFixed(2),
          "marker-end": "url(#arrow)",
        }),
      );
    }
    for (const [name, pos] of entityRow) {
      const group = svg("g", { class: "entity-node", "data-entity": name });
      group.appendChild(svg("circle", { cx: pos.x, cy: pos.y, r: 14, fill: "#3b6fd4" }));
      group.appendChild(svg("text", { x: pos.x, y: pos.y - 20, "text-anchor": "middle" }, name));
      this.graphPane.appendChild(group);
    }
    for (const [id, pos] of chunkRow) {
      const group = svg("g", { class: "chunk-evidence-node", "data-chunk": id });
      group.appendChild(svg("rect", { x: pos.x - 16, y: pos.y - 10, width: 32, height: 20, rx: 3, fill: "#9aa0a6" }));
      group.appendChild(svg("text", { x: pos.x, y: pos.y + 26, "text-anchor": "middle" }, id.slice(0, 8)));
      this.graphPane.appendChild(group);
    }
  }
}
