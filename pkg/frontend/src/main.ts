import { ApiClient } from './api';
import { ViewerApp } from './app';

const params = new URLSearchParams(window.location.search);
const baseUrl = params.get('api') ?? '';

document.addEventListener('DOMContentLoaded', () => {
  const root = document.getElementById('viewer-root');
  if (!root) throw new Error('missing #viewer-root');
  const app = new ViewerApp(new ApiClient(baseUrl), root);
  void app.loadCases().then(async () => {
    if (app.caseSelect.options.length > 0) {
      await app.openCase(app.caseSelect.options[0].value);
    }
  });
  (window as unknown as { viewer: ViewerApp }).viewer = app;
});
