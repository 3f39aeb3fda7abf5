import type { PredictResponse, WhatIfResponse } from "./api.js";

// One physician session: the entered prefix plus the server responses that
// back the current render. `responses[m]` answers the first m procedures, so
// undo is a pop that lands on an earlier, still-authoritative response.
export class Session {
  prefix: string[] = [];
  responses: PredictResponse[] = [];
  whatIf: WhatIfResponse | null = null;

  get last(): PredictResponse | null {
    return this.responses.length ? this.responses[this.responses.length - 1] : null;
  }

  get trajectory(): number[] {
    return this.last ? this.last.step_entropies : [];
  }

  commitInitial(response: PredictResponse): void {
    this.prefix = [];
    this.responses = [response];
    this.whatIf = null;
  }

  commitAdd(code: string, response: PredictResponse): void {
    this.prefix.push(code);
    this.responses.push(response);
    this.whatIf = null; // stale for the new prefix until refreshed
  }

  undo(): boolean {
    if (this.prefix.length === 0) return false;
    this.prefix.pop();
    this.responses.pop();
    this.whatIf = null;
    return true;
  }

  commitWhatIf(response: WhatIfResponse): void {
    this.whatIf = response;
  }
}
