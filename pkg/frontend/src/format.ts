/** Metric values are shown exactly as the server sent them, to 3 decimals. */
export function fmt3(value: number): string {
  return value.toFixed(3);
}

export function pct(value: number): string {
  return `${Math.round(value * 100)}%`;
}
