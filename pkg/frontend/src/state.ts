import type { SubmitBody, TaskPayload } from './types.js';

/**
 * Tri-state answer: null means the annotator has not judged it yet.
 * Defaulted checkboxes bias labels, so unset is a real state and nothing
 * can be submitted while any answer is still null.
 */
export type Tri = boolean | null;

/**
 * View state for one task: one toggle per atom in checklist mode, a single
 * alignment toggle in legacy mode, and the quality toggle in both.
 */
export class ChecklistState {
  readonly toggles: Tri[];
  quality: Tri = null;

  constructor(readonly task: TaskPayload) {
    const count = task.mode === 'checklist' ? task.atoms.length : 1;
    this.toggles = new Array<Tri>(count).fill(null);
  }

  setToggle(index: number, value: boolean): void {
    if (index < 0 || index >= this.toggles.length) {
      throw new RangeError(`toggle index ${index} out of range`);
    }
    this.toggles[index] = value;
  }

  setQuality(value: boolean): void {
    this.quality = value;
  }

  /** True once every toggle and the quality question have explicit answers. */
  get complete(): boolean {
    return this.quality !== null && this.toggles.every((t) => t !== null);
  }

  /**
   * The exact body POSTed to the server. Throws while incomplete, which is
   * what makes "submit with an unset toggle" impossible by construction.
   */
  buildSubmission(annotatorId: string): SubmitBody {
    if (!this.complete) {
      throw new Error('cannot submit: not every answer has been set');
    }
    const body: SubmitBody = {
      task_id: this.task.task_id,
      annotator_id: annotatorId,
      quality: this.quality as boolean,
    };
    if (this.task.mode === 'checklist') {
      body.atom_labels = this.toggles.map((t) => t as boolean);
    } else {
      body.alignment = this.toggles[0] as boolean;
    }
    return body;
  }
}
