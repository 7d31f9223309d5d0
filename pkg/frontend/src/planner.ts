// Session state and pure view-model logic for the field planner.
//
// A session holds the loaded surface, the operator's pinned window
// placements and the latest conditional slice. All efficiency numbers
// pass through untouched from the service; this module only selects,
// indexes and formats them.

import type { Meta, SlicePayload, SurfacePayload } from "./api.js";

export interface Readout {
  // recommended placement for each unpinned window (conditional argmax)
  recommended: Record<string, number>;
  retainedPct: string;
  retained: number;
}

export interface PlannerSession {
  meta: Meta;
  surface: SurfacePayload;
  pins: Map<string, number>;
  slice: SlicePayload | null;
  // monotone token guarding against stale slice responses
  requestToken: number;
  appliedToken: number;
}

export function newSession(meta: Meta, surface: SurfacePayload): PlannerSession {
  return { meta, surface, pins: new Map(), slice: null, requestToken: 0, appliedToken: 0 };
}

export function windowMeta(session: PlannerSession, name: string) {
  const w = session.meta.windows.find((w) => w.name === name);
  if (!w) throw new Error(`unknown window ${name}`);
  return w;
}

export function validatePin(session: PlannerSession, name: string, value: number): string | null {
  const w = windowMeta(session, name);
  if (Number.isNaN(value)) return `pin for ${name} is not a number`;
  if (value < w.lower || value > w.upper) {
    return `value ${value} outside window ${name} domain [${w.lower}, ${w.upper}]`;
  }
  return null;
}

export function pin(session: PlannerSession, name: string, value: number): void {
  const problem = validatePin(session, name, value);
  if (problem) throw new Error(problem);
  if (session.pins.size === session.meta.windows.length - 1 && !session.pins.has(name)) {
    throw new Error("cannot pin every window; leave at least one free");
  }
  session.pins.set(name, value);
}

export function unpin(session: PlannerSession, name: string): void {
  session.pins.delete(name);
  if (session.pins.size === 0) session.slice = null;
}

export function unpinAll(session: PlannerSession): void {
  session.pins.clear();
  session.slice = null;
}

export function nextToken(session: PlannerSession): number {
  session.requestToken += 1;
  return session.requestToken;
}

/** Apply a slice response unless a newer request superseded it. */
export function applySlice(
  session: PlannerSession,
  token: number,
  slice: SlicePayload,
): boolean {
  if (token < session.appliedToken) return false;
  session.appliedToken = token;
  session.slice = slice;
  return true;
}

export function formatPct(x: number): string {
  return `${(100 * x).toFixed(1)}%`;
}

export function readout(slice: SlicePayload): Readout {
  const recommended: Record<string, number> = {};
  slice.free_windows.forEach((name, j) => {
    recommended[name] = slice.argmax_point[j];
  });
  return {
    recommended,
    retained: slice.retained_efficiency,
    retainedPct: formatPct(slice.retained_efficiency),
  };
}

/** Indices of prediction points with efficiency >= t; at t = 1 only the
 * argmax point(s) remain. */
export function highlightIndices(eff: readonly number[], t: number): number[] {
  const out: number[] = [];
  eff.forEach((e, i) => {
    if (e >= t) out.push(i);
  });
  return out;
}

/** Efficiencies currently shown: the conditional slice when pins exist,
 * the full surface otherwise. Values are passed through verbatim. */
export function displayedEfficiencies(session: PlannerSession): readonly number[] {
  if (session.pins.size > 0 && session.slice) return session.slice.eff;
  return session.surface.eff;
}

export function displayedPoints(session: PlannerSession): readonly number[][] {
  if (session.pins.size > 0 && session.slice) return session.slice.points;
  return session.surface.points;
}

export function snapToLevel(levels: readonly number[], value: number): number {
  let best = levels[0];
  let bestGap = Math.abs(value - best);
  for (const level of levels) {
    const gap = Math.abs(value - level);
    if (gap < bestGap) {
      best = level;
      bestGap = gap;
    }
  }
  return best;
}
