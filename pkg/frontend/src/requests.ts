/** Build /api/generate payloads from editor state and condition inputs. */

import { GeneratePayload } from "./api.js";
import { MaskEditorState } from "./maskState.js";

export interface ConditionInputs {
  target: number;
  env?: Record<string, number>;
  gamma?: number | null;
  lambda?: number | null;
  resampleU?: number;
}

export function buildRequest(
  model: string,
  state: MaskEditorState,
  condition: ConditionInputs,
  n: number,
  seed: number,
): GeneratePayload {
  const spec = state.toSpec();
  return {
    model,
    condition: { target: condition.target, env: condition.env ?? {} },
    mask_spec: spec,
    // the reference only matters when something is fixed
    reference: spec === "" ? null : [...state.pinned],
    n,
    seed,
    gamma: condition.gamma ?? null,
    lambda: condition.lambda ?? null,
    resample_u: condition.resampleU ?? 20,
  };
}
