import { FAILURE_TYPES, type FailureType } from "./types.js";

export interface ForceNode {
  id: string;
  weights: Record<FailureType, number>;
  x: number;
  y: number;
  vx: number;
  vy: number;
}

export interface ForceLayoutResult {
  anchors: { type: FailureType; x: number; y: number }[];
  nodes: ForceNode[];
}

/** Deterministic jitter so layouts are reproducible without an RNG. */
function hash01(text: string, salt: number): number {
  let h = 2166136261 ^ salt;
  for (let i = 0; i < text.length; i++) {
    h ^= text.charCodeAt(i);
    h = Math.imul(h, 16777619);
  }
  return ((h >>> 0) % 10_000) / 10_000;
}

/** Velocity-Verlet force layout: the four failure anchors are pinned at the
 * corners of a square; each question node is attracted to every anchor in
 * proportion to its metric weight and nodes repel each other (link-free
 * many-body). Fixed step count keeps it deterministic. */
export function forceLayout(
  questions: { question_id: string; weights: Record<FailureType, number> }[],
  size = 400,
  steps = 300,
): ForceLayoutResult {
  const margin = 40;
  const corners: [number, number][] = [
    [margin, margin],
    [size - margin, margin],
    [margin, size - margin],
    [size - margin, size - margin],
  ];
  const anchors = FAILURE_TYPES.map((type, i) => ({ type, x: corners[i][0], y: corners[i][1] }));

  const nodes: ForceNode[] = questions.map((q) => ({
    id: q.question_id,
    weights: q.weights,
    x: size / 2 + (hash01(q.question_id, 1) - 0.5) * 40,
    y: size / 2 + (hash01(q.question_id, 2) - 0.5) * 40,
    vx: 0,
    vy: 0,
  }));

  const dt = 0.05;
  const attraction = 2.0;
  const repulsion = 1200;
  const damping = 0.85;

  const acceleration = (node: ForceNode): [number, number] => {
    let ax = 0;
    let ay = 0;
    for (const anchor of anchors) {
      const w = node.weights[anchor.type] ?? 0;
      ax += attraction * w * (anchor.x - node.x);
      ay += attraction * w * (anchor.y - node.y);
    }
    for (const other of nodes) {
      if (other === node) continue;
      const dx = node.x - other.x;
      const dy = node.y - other.y;
      const d2 = Math.max(dx * dx + dy * dy, 25);
      const inv = repulsion / (d2 * Math.sqrt(d2));
      ax += dx * inv;
      ay += dy * inv;
    }
    // gentle pull to the center keeps weightless nodes on screen
    ax += 0.1 * (size / 2 - node.x);
    ay += 0.1 * (size / 2 - node.y);
    return [ax, ay];
  };

  let accel = nodes.map(acceleration);
  for (let step = 0; step < steps; step++) {
    nodes.forEach((node, i) => {
      const [ax, ay] = accel[i];
      node.x += node.vx * dt + 0.5 * ax * dt * dt;
      node.y += node.vy * dt + 0.5 * ay * dt * dt;
    });
    const next = nodes.map(acceleration);
    nodes.forEach((node, i) => {
      node.vx = (node.vx + 0.5 * (accel[i][0] + next[i][0]) * dt) * damping;
      node.vy = (node.vy + 0.5 * (accel[i][1] + next[i][1]) * dt) * damping;
      node.x = Math.min(Math.max(node.x, 0), size);
      node.y = Math.min(Math.max(node.y, 0), size);
    });
    accel = next;
  }
  return { anchors, nodes };
}
