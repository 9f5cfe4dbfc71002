import { clear, el, svg } from "../dom.js";
import { fmt3 } from "../format.js";
import { polygonPoints, radarVertices, seriesColor } from "../radar.js";
import type { ViewState } from "../state.js";
import type { RadarChart, SearchResult } from "../types.js";

export interface SamplingCallbacks {
  onPreview?(): void;
  onLaunch?(label: string): void;
}

/** Sampling configuration form, preview of the sampled questions, run
 * launcher, and per-question radar charts overlaying the original / before /
 * after series. Clicking a polygon vertex reveals its numeric value. */
export class SamplingPanel {
  readonly root: HTMLElement;
  private previewList: HTMLElement;
  private chartsPane: HTMLElement;
  private valuePane: HTMLElement;
  private charts: RadarChart[] = [];

  constructor(
    private readonly state: ViewState,
    private readonly callbacks: SamplingCallbacks = {},
  ) {
    this.root = el("div", { class: "sampling-panel panel" });
    this.root.appendChild(el("h3", {}, "Sampling & Comparison"));
    this.root.appendChild(this.buildForm());
    this.previewList = el("ul", { class: "sampling-preview" });
    this.root.appendChild(this.previewList);
    this.chartsPane = el("div", { class: "radar-charts" });
    this.root.appendChild(this.chartsPane);
    this.valuePane = el("div", { class: "radar-values" });
    this.root.appendChild(this.valuePane);
  }

  private buildForm(): HTMLElement {
    const draft = this.state.samplingDraft;
    const form = el("form", { class: "sampling-form" });

    const numeric = (name: string, label: string, value: number, min: number, max: number, step: number) => {
      const wrap = el("label", { class: "field" });
      wrap.appendChild(el("span", {}, label));
      const input = el("input", { type: "number", name, value, min, max, step });
      input.addEventListener("change", () => {
        this.state.updateSampling({ [name]: Number((input as HTMLInputElement).value) });
      });
      wrap.appendChild(input);
      return wrap;
    };

    form.appendChild(numeric("diversity", "Diversity", draft.diversity, 0, 2, 0.1));
    form.appendChild(numeric("num_chunks", "Chunks", draft.num_chunks, 1, 50, 1));
    form.appendChild(numeric("num_questions", "Questions", draft.num_questions, 1, 100, 1));

    const keywords = el("label", { class: "field" });
    keywords.appendChild(el("span", {}, "Keywords"));
    const keywordInput = el("input", { type: "text", name: "keywords", placeholder: "comma,separated" });
    keywordInput.addEventListener("change", () => {
      const parts = (keywordInput as HTMLInputElement).value.split(",").map((s) => s.trim()).filter(Boolean);
      this.state.updateSampling({ keywords: parts });
    });
    keywords.appendChild(keywordInput);
    form.appendChild(keywords);

    const tags = el("label", { class: "field" });
    tags.appendChild(el("span", {}, "Tags"));
    const tagsInput = el("input", { type: "text", name: "tags", placeholder: "filter,tags" });
    tagsInput.addEventListener("change", () => {
      const parts = (tagsInput as HTMLInputElement).value.split(",").map((s) => s.trim()).filter(Boolean);
      this.state.updateSampling({ tags: parts });
    });
    tags.appendChild(tagsInput);
    form.appendChild(tags);

    const selection = el("label", { class: "field" });
    selection.appendChild(el("span", {}, "Selection"));
    const select = el("select", { name: "selection" });
    for (const mode of ["random", "high_hallucination", "similarity_to_focus", "improvement_potential"]) {
      select.appendChild(el("option", { value: mode }, mode));
    }
    select.addEventListener("change", () => {
      this.state.updateSampling({ selection: (select as HTMLSelectElement).value as never });
    });
    selection.appendChild(select);
    form.appendChild(selection);

    const preview = el("button", { type: "button", class: "preview-btn" }, "Preview");
    preview.addEventListener("click", () => this.callbacks.onPreview?.());
    const launch = el("button", { type: "button", class: "launch-btn" }, "Run");
    launch.addEventListener("click", () => this.callbacks.onLaunch?.("after"));
    form.append(preview, launch);
    return form;
  }

  setPreview(results: SearchResult[]): void {
    clear(this.previewList);
    for (const result of results) {
      const item = el("li", { class: "preview-item", "data-question": result.question_id });
      item.appendChild(el("span", {}, result.text));
      item.addEventListener("click", () => this.state.selectQuestion(result.question_id));
      this.previewList.appendChild(item);
    }
  }

  setCharts(charts: RadarChart[]): void {
    this.charts = charts;
    this.renderCharts();
  }

  private renderCharts(): void {
    clear(this.chartsPane);
    const size = 160;
    const cx = size / 2;
    const cy = size / 2;
    const radius = size / 2 - 20;
    for (const chart of this.charts) {
      const fig = el("figure", { class: "radar-chart", "data-question": chart.question_id });
      fig.appendChild(el("figcaption", {}, chart.question_id));
      const plot = svg("svg", { viewBox: `0 0 ${size} ${size}`, width: size, height: size });

      for (const ring of [0.25, 0.5, 0.75, 1.0]) {
        plot.appendChild(
          svg("polygon", {
            class: "radar-grid",
            points: polygonPoints(radarVertices(new Array(chart.axes.length).fill(ring), cx, cy, radius)),
            fill: "none",
            stroke: "#e0e0e0",
          }),
        );
      }
      chart.axes.forEach((axis, i) => {
        const angle = (Math.PI * 2 * i) / chart.axes.length - Math.PI / 2;
        plot.appendChild(svg("text", {
          x: (cx + Math.cos(angle) * radius * 1.12).toFixed(1),
          y: (cy + Math.sin(angle) * radius * 1.12).toFixed(1),
          "text-anchor": "middle", class: "radar-axis-label",
        }, axis.slice(0, 12)));
      });

      // draw in fixed order so before/after overlay consistently
      const labels = Object.keys(chart.series).sort(
        (a, b) => ["original", "before", "after"].indexOf(a) - ["original", "before", "after"].indexOf(b),
      );
      for (const label of labels) {
        const vertices = radarVertices(chart.series[label], cx, cy, radius);
        const polygon = svg("polygon", {
          class: `radar-series series-${label}`,
          points: polygonPoints(vertices),
          fill: seriesColor(label),
          "fill-opacity": 0.25,
          stroke: seriesColor(label),
          "stroke-width": 1.5,
          "data-label": label,
        });
        plot.appendChild(polygon);
        vertices.forEach((vertex, i) => {
          const dot = svg("circle", {
            class: "radar-vertex",
            cx: vertex.x.toFixed(2),
            cy: vertex.y.toFixed(2),
            r: 2.5,
            fill: seriesColor(label),
            "data-label": label,
            "data-axis": chart.axes[i],
            "data-value": String(vertex.value),
          });
          dot.addEventListener("click", () =>
            this.showValue(chart.question_id, label, chart.axes[i], vertex.value),
          );
          plot.appendChild(dot);
        });
      }
      fig.appendChild(plot);
      this.chartsPane.appendChild(fig);
    }
  }

  private showValue(questionId: string, label: string, axis: string, value: number): void {
    clear(this.valuePane);
    this.valuePane.appendChild(
      el("p", { class: "radar-value" }, `${questionId} · ${label} · ${axis} = ${fmt3(value)}`),
    );
  }
}
