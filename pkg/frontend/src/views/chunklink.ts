import { clear, el, svg } from "../dom.js";
import type { ViewState } from "../state.js";
import type { ChunkRelink } from "../types.js";

const CLASS_COLORS: Record<string, string> = {
  relevant: "#3b6fd4",
  irrelevant: "#b8bcc2",
  negative: "#5c6066",
};

/** Chunk-Relink comparison: one column per retrieval run, node size encoding
 * query similarity, color encoding relevance class, connecting lines between
 * identical chunks, and click-to-highlight across every run. */
export class ChunkRelinkView {
  readonly root: HTMLElement;
  private data: ChunkRelink | null = null;
  private selectedChunk: string | null = null;
  private plot: SVGSVGElement;
  private readonly columnWidth = 150;
  private readonly rowHeight = 44;

  constructor(state: ViewState) {
    this.root = el("div", { class: "chunklink-view panel" });
    this.root.appendChild(el("h3", {}, "Chunk-Relink"));
    this.plot = svg("svg", { class: "chunklink-plot" });
    this.root.appendChild(this.plot);
    state.on("strategies", () => this.render());
  }

  setData(data: ChunkRelink): void {
    this.data = data;
    this.selectedChunk = null;
    this.render();
  }

  selectChunk(chunkId: string | null): void {
    this.selectedChunk = chunkId;
    this.render();
  }

  private nodeCenter(run: number, rank: number): { x: number; y: number } {
    return { x: 60 + run * this.columnWidth, y: 50 + rank * this.rowHeight };
  }

  private render(): void {
    clear(this.plot);
    if (!this.data) return;
    const { runs, links, node_sizes, chunks } = this.data;
    const maxRows = Math.max(...runs.map((r) => r.results.length), 1);
    const width = 60 + runs.length * this.columnWidth;
    const height = 70 + maxRows * this.rowHeight;
    this.plot.setAttribute("viewBox", `0 0 ${width} ${height}`);
    this.plot.setAttribute("width", String(width));
    this.plot.setAttribute("height", String(height));

    for (const link of links) {
      const a = this.nodeCenter(link.run_a, link.rank_a);
      const b = this.nodeCenter(link.run_b, link.rank_b);
      const chunkId = runs[link.run_a].results[link.rank_a].chunk_id;
      const highlighted = chunkId === this.selectedChunk;
      this.plot.appendChild(
        svg("line", {
          class: `relink-line${highlighted ? " highlighted" : ""}`,
          x1: a.x, y1: a.y, x2: b.x, y2: b.y,
          stroke: highlighted ? "#f4c542" : "#8fa8cc",
          "stroke-width": highlighted ? 2.5 : 1,
        }),
      );
    }

    runs.forEach((run, runIndex) => {
      const header = svg("text", {
        x: this.nodeCenter(runIndex, 0).x,
        y: 20,
        "text-anchor": "middle",
        class: "run-label",
      }, run.strategy.kind);
      this.plot.appendChild(header);

      run.results.forEach((item, rank) => {
        const { x, y } = this.nodeCenter(runIndex, rank);
        const size = node_sizes[runIndex]?.[rank] ?? item.similarity;
        const radius = 6 + Math.max(0, Math.min(1, size)) * 10;
        const selected = item.chunk_id === this.selectedChunk;
        const group = svg("g", {
          class: `chunk-node ${item.relevance_class}${selected ? " selected" : ""}`,
          "data-chunk": item.chunk_id,
          "data-run": runIndex,
        });
        if (selected) {
          group.appendChild(
            svg("circle", { cx: x, cy: y, r: radius + 4, fill: "none", stroke: "#7db3f0", "stroke-width": 3, class: "selected-ring" }),
          );
        }
        const circle = svg("circle", {
          cx: x, cy: y, r: radius,
          fill: CLASS_COLORS[item.relevance_class] ?? CLASS_COLORS.irrelevant,
        });
        const text = chunks[item.chunk_id]?.text ?? item.chunk_id;
        circle.appendChild(svg("title", {}, `${item.chunk_id} (${item.similarity.toFixed(3)})\n${text}`));
        group.appendChild(circle);
        group.addEventListener("click", () => this.selectChunk(item.chunk_id));
        this.plot.appendChild(group);
      });
    });
  }
}
