/** Mask editor state: which design coordinates are fixed, and at what values.
 *
 * Two editing modes mirror the two model kinds: a per-parameter grid for
 * tabular schemas and a prefix-fraction slider for airfoil vectors. The state
 * serializes to exactly the mask-spec grammar the service parses, and can be
 * restored from the bit vector the server echoes back.
 */

export type EditorMode = "tabular" | "airfoil";

export interface ComponentPresets {
  [name: string]: [number, number]; // inclusive index range
}

/** Hull component groups; applicable when the schema is wide enough. */
export const HULL_COMPONENTS: ComponentPresets = {
  midship: [6, 9],
  bow: [10, 18],
  stern: [19, 29],
  bulb: [30, 43],
};

export class MaskEditorState {
  readonly mode: EditorMode;
  readonly dim: number;
  fixed: boolean[];
  pinned: number[];
  /** airfoil mode: number of eighths fixed, 0..8 */
  prefixEighths = 0;

  constructor(mode: EditorMode, dim: number, referenceValues?: number[]) {
    this.mode = mode;
    this.dim = dim;
    this.fixed = new Array(dim).fill(false);
    this.pinned = referenceValues ? [...referenceValues] : new Array(dim).fill(0);
  }

  setPin(index: number, value: number): void {
    if (index < 0 || index >= this.dim) throw new RangeError(`index ${index} out of range`);
    this.fixed[index] = true;
    this.pinned[index] = value;
  }

  clearPin(index: number): void {
    this.fixed[index] = false;
  }

  applyComponent(name: string, presets: ComponentPresets = HULL_COMPONENTS): void {
    const range = presets[name];
    if (!range) throw new RangeError(`unknown component ${name}`);
    const [lo, hi] = range;
    if (hi >= this.dim) throw new RangeError(`component ${name} exceeds dim ${this.dim}`);
    for (let i = lo; i <= hi; i++) this.fixed[i] = true;
  }

  setPrefix(eighths: number): void {
    if (!Number.isInteger(eighths) || eighths < 0 || eighths > 8) {
      throw new RangeError(`prefix eighths must be 0..8, got ${eighths}`);
    }
    this.prefixEighths = eighths;
    const count = Math.floor((this.dim * eighths) / 8);
    this.fixed = this.fixed.map((_, i) => i < count);
  }

  maskBits(): number[] {
    return this.fixed.map((f) => (f ? 1 : 0));
  }

  fixedCount(): number {
    return this.fixed.filter(Boolean).length;
  }

  /** Serialize to the service grammar: prefix form for airfoil mode,
   * comma-separated inclusive ranges otherwise. Empty string = nothing fixed.
   */
  toSpec(): string {
    if (this.mode === "airfoil") {
      return this.prefixEighths === 0 ? "" : `first-${this.prefixEighths}/8`;
    }
    const tokens: string[] = [];
    let start = -1;
    for (let i = 0; i <= this.dim; i++) {
      const on = i < this.dim && this.fixed[i];
      if (on && start < 0) start = i;
      if (!on && start >= 0) {
        tokens.push(start === i - 1 ? `${start}` : `${start}-${i - 1}`);
        start = -1;
      }
    }
    return tokens.join(",");
  }

  /** Restore the fixed flags from a server-echoed bit vector. Pinned values
   * are client-side state and survive unchanged.
   */
  restoreBits(bits: number[]): void {
    if (bits.length !== this.dim) {
      throw new RangeError(`bit vector has ${bits.length} entries, editor dim is ${this.dim}`);
    }
    this.fixed = bits.map((b) => b !== 0);
    if (this.mode === "airfoil") {
      const count = bits.filter((b) => b !== 0).length;
      let k = -1;
      for (let cand = 0; cand <= 8; cand++) {
        if (Math.floor((this.dim * cand) / 8) === count) {
          k = cand;
          break;
        }
      }
      const prefixOk = bits.every((b, i) => (b !== 0) === (i < count));
      if (k < 0 || !prefixOk) {
        throw new RangeError("echoed bits are not a prefix mask; cannot restore slider");
      }
      this.prefixEighths = k;
    }
  }

  equals(other: MaskEditorState): boolean {
    return (
      this.mode === other.mode &&
      this.dim === other.dim &&
      this.prefixEighths === other.prefixEighths &&
      this.fixed.every((f, i) => f === other.fixed[i])
    );
  }

  clone(): MaskEditorState {
    const copy = new MaskEditorState(this.mode, this.dim, this.pinned);
    copy.fixed = [...this.fixed];
    copy.prefixEighths = this.prefixEighths;
    return copy;
  }
}
