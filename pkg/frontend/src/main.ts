import { ApiClient } from './api.js';
import { mountApp } from './app.js';
import { Session } from './session.js';

const STORAGE_KEY = 'atomeval.annotator_id';

function startSession(root: HTMLElement, annotatorId: string): void {
  localStorage.setItem(STORAGE_KEY, annotatorId);
  const session = new Session(new ApiClient(''), annotatorId);
  mountApp(root, session);
  void session.start();
}

function showLogin(root: HTMLElement): void {
  const form = document.createElement('form');
  form.className = 'login';
  const label = document.createElement('label');
  label.textContent = 'Annotator id';
  const input = document.createElement('input');
  input.name = 'annotator_id';
  input.required = true;
  input.autofocus = true;
  label.appendChild(input);
  const button = document.createElement('button');
  button.type = 'submit';
  button.textContent = 'Start annotating';
  form.append(label, button);
  form.addEventListener('submit', (event) => {
    event.preventDefault();
    const value = input.value.trim();
    if (value) startSession(root, value);
  });
  root.replaceChildren(form);
}

const root = document.getElementById('app');
if (root) {
  const params = new URLSearchParams(window.location.search);
  const annotatorId = params.get('annotator') ?? localStorage.getItem(STORAGE_KEY);
  if (annotatorId) {
    startSession(root, annotatorId);
  } else {
    showLogin(root);
  }
}
