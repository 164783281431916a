/** Pure view-model builders for the result gallery.
 *
 * These return plain data the DOM layer draws; fixed points are styled as
 * green triangles and generated points as purple dots, and tabular rows carry
 * a fixed flag for highlighting. Keeping this layer DOM-free makes it
 * testable in node.
 */

import { DesignItem, GenerateResult } from "./api.js";

export const FIXED_STYLE = { color: "#2e8b57", marker: "triangle" } as const;
export const GENERATED_STYLE = { color: "#7d3cff", marker: "dot" } as const;

export interface StyledPoint {
  x: number;
  y: number;
  fixed: boolean;
  surface: "upper" | "lower";
}

export interface AirfoilView {
  kind: "airfoil";
  points: StyledPoint[];
  predicted: number | null;
  feasible: boolean | null;
}

export interface TabularRow {
  name: string;
  value: number;
  fixed: boolean;
}

export interface TabularView {
  kind: "tabular";
  rows: TabularRow[];
  predicted: number | null;
  feasible: boolean | null;
}

export type DesignView = AirfoilView | TabularView;

export function designView(item: DesignItem, maskBits: number[]): DesignView {
  const geom = item.geometry;
  if ("stations" in geom) {
    const n = geom.stations.length;
    const points: StyledPoint[] = [];
    geom.upper.forEach((y, i) =>
      points.push({ x: geom.stations[i], y, fixed: maskBits[i] !== 0, surface: "upper" }),
    );
    geom.lower.forEach((y, i) =>
      points.push({ x: geom.stations[i], y, fixed: maskBits[n + i] !== 0, surface: "lower" }),
    );
    return {
      kind: "airfoil",
      points,
      predicted: item.predicted_performance,
      feasible: item.feasible,
    };
  }
  return {
    kind: "tabular",
    rows: geom.parameters.map((p, i) => ({
      name: p.name,
      value: p.value,
      fixed: maskBits[i] !== 0,
    })),
    predicted: item.predicted_performance,
    feasible: item.feasible,
  };
}

export function galleryViews(result: GenerateResult): DesignView[] {
  return result.designs.map((d) => designView(d, result.mask_bits));
}

/** Client-side MAPE badge; must agree with the server's evaluate endpoint
 * within display rounding.
 */
export function mapeBadge(values: number[], target: number): number {
  if (values.length === 0 || target === 0) return NaN;
  const pct =
    (values.reduce((acc, v) => acc + Math.abs(v - target) / Math.abs(target), 0) /
      values.length) *
    100;
  return pct;
}

export function formatBadge(pct: number): string {
  return Number.isNaN(pct) ? "n/a" : `${pct.toFixed(2)}%`;
}
