import { ApiClient, ApiError } from './api.js';
import { ChecklistState } from './state.js';
import type { Progress, SubmitBody } from './types.js';

export type Phase = 'loading' | 'annotating' | 'done' | 'offline';

export interface QueuedSubmission {
  body: SubmitBody;
  attempts: number;
}

type Scheduler = (fn: () => void, delayMs: number) => void;

export interface SessionOptions {
  retryDelayMs?: number;
  scheduler?: Scheduler;
}

/**
 * Drives one annotator's pass over the queue: fetch task, collect answers,
 * submit, advance. Server rejections keep the current answers on screen;
 * network failures park the submission in a visible retry queue instead of
 * losing it.
 */
export class Session {
  phase: Phase = 'loading';
  view: ChecklistState | null = null;
  progress: Progress | null = null;
  queued: QueuedSubmission | null = null;
  rejection: string | null = null;
  connectionError: string | null = null;

  private readonly retryDelayMs: number;
  private readonly scheduler: Scheduler;
  private readonly listeners: Array<() => void> = [];

  constructor(
    private readonly api: ApiClient,
    readonly annotatorId: string,
    options: SessionOptions = {},
  ) {
    this.retryDelayMs = options.retryDelayMs ?? 2000;
    this.scheduler = options.scheduler ?? ((fn, ms) => setTimeout(fn, ms));
  }

  onChange(listener: () => void): void {
    this.listeners.push(listener);
  }

  private emit(): void {
    for (const listener of this.listeners) listener();
  }

  imageUrl(): string {
    return this.view ? this.api.imageUrl(this.view.task.image_url) : '';
  }

  async start(): Promise<void> {
    await this.advance();
  }

  setToggle(index: number, value: boolean): void {
    this.view?.setToggle(index, value);
    this.emit();
  }

  setQuality(value: boolean): void {
    this.view?.setQuality(value);
    this.emit();
  }

  get canSubmit(): boolean {
    return this.phase === 'annotating' && this.view !== null
      && this.view.complete && this.queued === null;
  }

  /**
   * Submit the current answers. Completeness is enforced twice: the UI
   * disables the button, and buildSubmission throws regardless.
   */
  async submit(): Promise<void> {
    if (this.view === null) throw new Error('no task on screen');
    const body = this.view.buildSubmission(this.annotatorId);
    await this.send(body);
  }

  /** Manual retry of a queued submission or a failed task fetch. */
  async retry(): Promise<void> {
    if (this.queued !== null) {
      const body = this.queued.body;
      await this.send(body);
    } else if (this.phase === 'offline') {
      await this.advance();
    }
  }

  private async send(body: SubmitBody): Promise<void> {
    try {
      const response = await this.api.submit(body);
      this.queued = null;
      this.rejection = null;
      this.connectionError = null;
      this.progress = response.progress;
      this.emit();
      await this.advance();
    } catch (error) {
      if (error instanceof ApiError) {
        // the server refused the payload; keep answers so they can be fixed
        this.queued = null;
        this.rejection = error.detail;
      } else {
        this.queued = {
          body,
          attempts: (this.queued?.attempts ?? 0) + 1,
        };
        this.connectionError = String(error);
        this.scheduler(() => {
          void this.retry();
        }, this.retryDelayMs);
      }
      this.emit();
    }
  }

  private async advance(): Promise<void> {
    this.phase = 'loading';
    this.emit();
    try {
      const response = await this.api.nextTask(this.annotatorId);
      this.progress = response.progress;
      this.connectionError = null;
      this.rejection = null;
      if (response.done || !response.task) {
        this.phase = 'done';
        this.view = null;
      } else {
        this.phase = 'annotating';
        this.view = new ChecklistState(response.task);
      }
    } catch (error) {
      this.phase = 'offline';
      this.connectionError = String(error);
      this.scheduler(() => {
        void this.retry();
      }, this.retryDelayMs);
    }
    this.emit();
  }
}
