import { clear, el, svg } from "../dom.js";
import { forceLayout } from "../force.js";
import { fmt3 } from "../format.js";
import type { ViewState } from "../state.js";
import { FAILURE_COLORS, type FailuresResponse } from "../types.js";

/** Failure-type force graph: four pinned anchor nodes (red/yellow/blue/purple)
 * and question nodes attracted by their server-computed metric weights,
 * repelling each other. Layout runs client-side; weights come verbatim from
 * the API. */
export class ForceGraphView {
  readonly root: HTMLElement;
  private data: FailuresResponse | null = null;
  private plot: SVGSVGElement;
  private readonly size = 400;

  constructor(private readonly state: ViewState) {
    this.root = el("div", { class: "force-view panel" });
    this.root.appendChild(el("h3", {}, "Failure Clusters"));
    this.plot = svg("svg", {
      class: "force-plot",
      viewBox: `0 0 ${this.size} ${this.size}`,
      width: this.size,
      height: this.size,
    });
    this.root.appendChild(this.plot);
    state.on("selection", () => this.render());
    state.on("zoom", () => this.applyZoom());
  }

  setFailures(data: FailuresResponse): void {
    this.data = data;
    this.render();
  }

  private applyZoom(): void {
    const { x, y, k } = this.state.zoom;
    const group = this.plot.querySelector("g.zoom-layer");
    if (group) group.setAttribute("transform", `translate(${x},${y}) scale(${k})`);
  }

  private render(): void {
    clear(this.plot);
    if (!this.data) return;
    const layer = svg("g", { class: "zoom-layer" });
    this.plot.appendChild(layer);
    const layout = forceLayout(this.data.questions, this.size);

    for (const anchor of layout.anchors) {
      const group = svg("g", { class: "anchor", "data-type": anchor.type });
      group.appendChild(
        svg("rect", {
          x: (anchor.x - 10).toFixed(1),
          y: (anchor.y - 10).toFixed(1),
          width: 20,
          height: 20,
          rx: 4,
          fill: FAILURE_COLORS[anchor.type],
        }),
      );
      group.appendChild(
        svg("text", {
          x: anchor.x.toFixed(1),
          y: (anchor.y + 24).toFixed(1),
          "text-anchor": "middle",
          class: "anchor-label",
        }, anchor.type),
      );
      layer.appendChild(group);
    }

    for (const node of layout.nodes) {
      const selected = node.id === this.state.selectedQuestionId;
      const dot = svg("circle", {
        class: `force-node${selected ? " selected" : ""}`,
        cx: node.x.toFixed(2),
        cy: node.y.toFixed(2),
        r: selected ? 8 : 5,
        fill: selected ? "#f4c542" : "#dddddd",
        stroke: "#333333",
        "stroke-width": selected ? 2 : 0.8,
        "data-question": node.id,
      });
      const tooltip = Object.entries(node.weights)
        .map(([type, value]) => `${type}: ${fmt3(value)}`)
        .join("\n");
      dot.appendChild(svg("title", {}, `${node.id}\n${tooltip}`));
      dot.addEventListener("click", () => this.state.selectQuestion(node.id));
      layer.appendChild(dot);
    }
    this.applyZoom();
  }
}
