export interface RadarVertex {
  x: number;
  y: number;
  value: number;
}

/** Vertex positions for a 6-axis radar polygon. Axis 0 points straight up;
 * values are radii on a [0,1] scale. The axis order is fixed server-side so
 * polygons are comparable across charts. */
export function radarVertices(values: number[], cx: number, cy: number, radius: number): RadarVertex[] {
  return values.map((value, i) => {
    const angle = (Math.PI * 2 * i) / values.length - Math.PI / 2;
    return {
      x: cx + Math.cos(angle) * radius * value,
      y: cy + Math.sin(angle) * radius * value,
      value,
    };
  });
}

export function polygonPoints(vertices: RadarVertex[]): string {
  return vertices.map((v) => `${v.x.toFixed(2)},${v.y.toFixed(2)}`).join(" ");
}

/** Distance of a vertex from the chart center; dominance on an axis means a
 * strictly larger radial distance there. */
export function vertexRadius(vertex: RadarVertex, cx: number, cy: number): number {
  return Math.hypot(vertex.x - cx, vertex.y - cy);
}

export const SERIES_COLORS: Record<string, string> = {
  original: "#9aa0a6",
  before: "#3b6fd4",
  after: "#2e9e5b",
};

export function seriesColor(label: string): string {
  return SERIES_COLORS[label] ?? "#666666";
}
