// Wire types for the annotation server endpoints.

export interface AtomDescriptor {
  id: number;
  kind: string; // Object | Attribute | Count | Relation
  surface: string;
}

export type TaskMode = 'checklist' | 'legacy';

export interface TaskPayload {
  task_id: string;
  prompt_id: string;
  model_id: string;
  rewritten: boolean;
  mode: TaskMode;
  prompt_text: string;
  image_url: string;
  atoms: AtomDescriptor[];
  status: string;
}

export interface Progress {
  total: number;
  completed: number;
  annotators_per_image: number;
  per_annotator: Record<string, number>;
}

export interface NextTaskResponse {
  done: boolean;
  task?: TaskPayload;
  progress: Progress;
}

export interface SubmitBody {
  task_id: string;
  annotator_id: string;
  quality: boolean;
  atom_labels?: boolean[];
  alignment?: boolean;
}

export interface SubmitResponse {
  ok: boolean;
  progress: Progress;
}
