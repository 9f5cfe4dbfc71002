// Radar geometry: when one series dominates another on an axis, its polygon
// vertex on that axis sits strictly outside the other's.

import { describe, expect, it } from "vitest";

import { polygonPoints, radarVertices, vertexRadius } from "../src/radar.js";
import { ViewState } from "../src/state.js";
import { SamplingPanel } from "../src/views/sampling.js";
import type { RadarChart } from "../src/types.js";

const CX = 80;
const CY = 80;
const R = 60;

describe("radar vertex geometry", () => {
  it("per-axis dominance puts the dominating vertex strictly outside", () => {
    const before = [0.2, 0.4, 0.3, 0.5, 0.2, 0.6];
    const after = [0.2, 0.4, 0.3, 0.5, 0.9, 0.6]; // dominates on axis 4
    const vb = radarVertices(before, CX, CY, R);
    const va = radarVertices(after, CX, CY, R);
    expect(vertexRadius(va[4], CX, CY)).toBeGreaterThan(vertexRadius(vb[4], CX, CY));
    for (const axis of [0, 1, 2, 3, 5]) {
      expect(vertexRadius(va[axis], CX, CY)).toBeCloseTo(vertexRadius(vb[axis], CX, CY), 10);
    }
  });

  it("vertex radius is proportional to the value", () => {
    const vertices = radarVertices([1, 0.5, 0.25, 1, 1, 1], CX, CY, R);
    expect(vertexRadius(vertices[0], CX, CY)).toBeCloseTo(R, 8);
    expect(vertexRadius(vertices[1], CX, CY)).toBeCloseTo(R / 2, 8);
    expect(vertexRadius(vertices[2], CX, CY)).toBeCloseTo(R / 4, 8);
  });

  it("six axes land at sixty-degree spacing starting straight up", () => {
    const vertices = radarVertices([1, 1, 1, 1, 1, 1], CX, CY, R);
    expect(vertices[0].x).toBeCloseTo(CX, 8);
    expect(vertices[0].y).toBeCloseTo(CY - R, 8);
    const angles = vertices.map((v) => Math.atan2(v.y - CY, v.x - CX));
    for (let i = 1; i < angles.length; i++) {
      let diff = angles[i] - angles[i - 1];
      while (diff < 0) diff += Math.PI * 2;
      expect(diff).toBeCloseTo(Math.PI / 3, 8);
    }
  });

  it("polygonPoints round-trips through the rendered polygon", () => {
    const chart: RadarChart = {
      question_id: "q-geom",
      axes: ["retrieval_failure", "prompt_fragility", "generation_anomaly", "standard_anomaly", "correctness", "topic_relevance"],
      series: {
        before: [0.2, 0.4, 0.3, 0.5, 0.2, 0.6],
        after: [0.3, 0.5, 0.4, 0.6, 0.9, 0.7],
      },
    };
    const panel = new SamplingPanel(new ViewState());
    panel.setCharts([chart]);
    const size = 160;
    const cx = size / 2;
    const cy = size / 2;
    const radius = size / 2 - 20;
    const beforePolygon = panel.root.querySelector("polygon.series-before");
    const afterPolygon = panel.root.querySelector("polygon.series-after");
    expect(beforePolygon?.getAttribute("points")).toBe(polygonPoints(radarVertices(chart.series.before, cx, cy, radius)));
    expect(afterPolygon?.getAttribute("points")).toBe(polygonPoints(radarVertices(chart.series.after, cx, cy, radius)));

    // after dominates before on every axis here, so every rendered after
    // vertex is strictly outside the before vertex
    const parse = (points: string | null | undefined) =>
      (points ?? "").split(" ").map((pair) => pair.split(",").map(Number) as [number, number]);
    const beforePts = parse(beforePolygon?.getAttribute("points"));
    const afterPts = parse(afterPolygon?.getAttribute("points"));
    for (let axis = 0; axis < 6; axis++) {
      const rb = Math.hypot(beforePts[axis][0] - cx, beforePts[axis][1] - cy);
      const ra = Math.hypot(afterPts[axis][0] - cx, afterPts[axis][1] - cy);
      expect(ra).toBeGreaterThan(rb);
    }
  });

  it("clicking a vertex reveals the numeric value", () => {
    const chart: RadarChart = {
      question_id: "q-click",
      axes: ["retrieval_failure", "prompt_fragility", "generation_anomaly", "standard_anomaly", "correctness", "topic_relevance"],
      series: { after: [0.1, 0.2, 0.3, 0.4, 0.512, 0.6] },
    };
    const panel = new SamplingPanel(new ViewState());
    panel.setCharts([chart]);
    const vertex = panel.root.querySelector('circle.radar-vertex[data-axis="correctness"]');
    vertex?.dispatchEvent(new MouseEvent("click", { bubbles: true }));
    expect(panel.root.querySelector(".radar-value")?.textContent).toBe(
      "q-click · after · correctness = 0.512",
    );
  });
});
