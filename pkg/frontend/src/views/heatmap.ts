import { clear, el, svg } from "../dom.js";
import type { ViewState } from "../state.js";
import type { CellTopics, ProjectionExport, SearchResult } from "../types.js";

const DOT_CAP = 20_000;

export interface HeatmapCallbacks {
  onCellClick?(i: number, j: number): void;
}

/** Chunk-distribution heatmap: grid densities as background intensity,
 * chunks as white dots (capped), searched questions highlighted yellow when
 * selected and blue otherwise. Shares the zoom transform with the force
 * view. */
export class HeatmapView {
  readonly root: HTMLElement;
  private projection: ProjectionExport | null = null;
  private searched: SearchResult[] = [];
  private topicsPanel: HTMLElement;
  private plot: SVGSVGElement;
  private readonly size = 400;
  private cellAggregation = 1; // powers of two; UI-side granularity control

  constructor(
    private readonly state: ViewState,
    private readonly callbacks: HeatmapCallbacks = {},
  ) {
    this.root = el("div", { class: "heatmap-view panel" });
    this.root.appendChild(el("h3", {}, "Chunk Distribution"));
    this.plot = svg("svg", {
      class: "heatmap-plot",
      viewBox: `0 0 ${this.size} ${this.size}`,
      width: this.size,
      height: this.size,
    });
    this.root.appendChild(this.plot);
    this.topicsPanel = el("div", { class: "cell-topics" });
    this.root.appendChild(this.topicsPanel);
    state.on("selection", () => this.render());
    state.on("zoom", () => this.applyZoom());
  }

  setProjection(projection: ProjectionExport): void {
    this.projection = projection;
    this.render();
  }

  setSearched(results: SearchResult[]): void {
    this.searched = results;
    this.render();
  }

  setCellAggregation(power: number): void {
    this.cellAggregation = Math.max(1, 2 ** Math.round(power));
    this.render();
  }

  showTopics(topics: CellTopics): void {
    clear(this.topicsPanel);
    this.topicsPanel.appendChild(
      el("h4", {}, `Cell (${topics.cell.i}, ${topics.cell.j}) topics`),
    );
    const list = el("ul", { class: "topic-list" });
    for (const { term, score } of topics.keywords) {
      list.appendChild(el("li", {}, `${term} (${score.toFixed(3)})`));
    }
    this.topicsPanel.appendChild(list);
  }

  private applyZoom(): void {
    const { x, y, k } = this.state.zoom;
    const group = this.plot.querySelector("g.zoom-layer");
    if (group) group.setAttribute("transform", `translate(${x},${y}) scale(${k})`);
  }

  private render(): void {
    clear(this.plot);
    if (!this.projection) return;
    const { grid, points } = this.projection;
    const layer = svg("g", { class: "zoom-layer" });
    this.plot.appendChild(layer);

    const agg = this.cellAggregation;
    const resolution = Math.ceil(grid.resolution / agg);
    const cellPx = this.size / resolution;
    let maxDensity = 0;
    const aggregated: number[] = new Array(resolution * resolution).fill(0);
    for (let row = 0; row < grid.resolution; row++) {
      for (let col = 0; col < grid.resolution; col++) {
        const value = grid.cells[row * grid.resolution + col];
        if (value <= 0) continue;
        const target = Math.floor(row / agg) * resolution + Math.floor(col / agg);
        aggregated[target] += value;
        if (aggregated[target] > maxDensity) maxDensity = aggregated[target];
      }
    }
    for (let row = 0; row < resolution; row++) {
      for (let col = 0; col < resolution; col++) {
        const density = aggregated[row * resolution + col];
        if (density <= 0) continue;
        const intensity = maxDensity > 0 ? density / maxDensity : 0;
        const rect = svg("rect", {
          class: "density-cell",
          x: (col * cellPx).toFixed(2),
          y: (row * cellPx).toFixed(2),
          width: cellPx.toFixed(2),
          height: cellPx.toFixed(2),
          fill: "#1a365d",
          "fill-opacity": (0.15 + 0.85 * intensity).toFixed(3),
          "data-cell": `${row * agg},${col * agg}`,
        });
        rect.addEventListener("click", () => this.callbacks.onCellClick?.(row * agg, col * agg));
        layer.appendChild(rect);
      }
    }

    const { bounds } = grid;
    const sx = (x: number) =>
      bounds.x_max === bounds.x_min ? this.size / 2 : ((x - bounds.x_min) / (bounds.x_max - bounds.x_min)) * this.size;
    const sy = (y: number) =>
      bounds.y_max === bounds.y_min ? this.size / 2 : ((y - bounds.y_min) / (bounds.y_max - bounds.y_min)) * this.size;

    for (const point of points.slice(0, DOT_CAP)) {
      const dot = svg("circle", {
        class: "chunk-dot",
        cx: sx(point.x).toFixed(2),
        cy: sy(point.y).toFixed(2),
        r: 1.2,
        fill: "#ffffff",
        "fill-opacity": 0.8,
        "data-chunk": point.id,
      });
      dot.appendChild(svg("title", {}, `chunk ${point.id}`));
      layer.appendChild(dot);
    }

    for (const result of this.searched) {
      if (!result.position) continue;
      const selected = result.question_id === this.state.selectedQuestionId;
      const dot = svg("circle", {
        class: `question-dot${selected ? " selected" : ""}`,
        cx: sx(result.position.x).toFixed(2),
        cy: sy(result.position.y).toFixed(2),
        r: selected ? 6 : 4,
        fill: selected ? "#f4c542" : "#4f83cc",
        stroke: "#222222",
        "stroke-width": 0.6,
        "data-question": result.question_id,
      });
      dot.appendChild(svg("title", {}, `${result.question_id}: ${result.text}`));
      dot.addEventListener("click", () => this.state.selectQuestion(result.question_id));
      layer.appendChild(dot);
    }
    this.applyZoom();
  }
}
