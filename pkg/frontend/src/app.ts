import { ApiClient } from './api';
import { composeSlice } from './overlay';
import { decodeBase64Bytes, decodeRle } from './rle';
import {
  canUndo,
  clampSliceIndex,
  initialState,
  setAxis,
  setSliceIndex,
  withSession,
  withSummary,
  type ViewerState,
} from './state';
import { canvasToVoxel, sliceCount, sliceDims, voxelToCanvas } from './transform';
import type { Axis, SlicePayload } from './types';

const AXES: Axis[] = ['axial', 'coronal', 'sagittal'];

/** The viewer app: owns state, renders into provided DOM elements, and talks
 * to the session service. Constructed with its document so tests can drive it
 * under jsdom with a mocked fetch. */
export class ViewerApp {
  state: ViewerState = initialState();
  lastSlice: SlicePayload | null = null;
  lastComposed: Uint8ClampedArray | null = null;

  constructor(
    public api: ApiClient,
    public root: HTMLElement,
    public doc: Document = document,
  ) {
    this.buildDom();
  }

  // -- DOM scaffolding -------------------------------------------------------
  canvas!: HTMLCanvasElement;
  caseSelect!: HTMLSelectElement;
  axisButtons: Record<Axis, HTMLButtonElement> = {} as Record<Axis, HTMLButtonElement>;
  sliceSlider!: HTMLInputElement;
  sliceLabel!: HTMLSpanElement;
  modeButtons: Record<'positive' | 'negative', HTMLButtonElement> = {} as Record<
    'positive' | 'negative',
    HTMLButtonElement
  >;
  undoButton!: HTMLButtonElement;
  opacitySlider!: HTMLInputElement;
  zoomSelect!: HTMLSelectElement;
  reportPanel!: HTMLElement;
  dscPanel!: HTMLElement;
  historyPanel!: HTMLElement;
  errorBanner!: HTMLElement;

  private buildDom(): void {
    const el = <K extends keyof HTMLElementTagNameMap>(
      tag: K,
      cls?: string,
    ): HTMLElementTagNameMap[K] => {
      const node = this.doc.createElement(tag);
      if (cls) node.className = cls;
      return node;
    };

    const toolbar = el('div', 'toolbar');
    this.caseSelect = el('select', 'case-select');
    toolbar.appendChild(this.caseSelect);
    for (const axis of AXES) {
      const btn = el('button', `axis-${axis}`);
      btn.textContent = axis;
      btn.addEventListener('click', () => this.switchAxis(axis));
      this.axisButtons[axis] = btn;
      toolbar.appendChild(btn);
    }
    this.sliceSlider = el('input', 'slice-slider');
    this.sliceSlider.type = 'range';
    this.sliceSlider.addEventListener('input', () =>
      this.setSlice(parseInt(this.sliceSlider.value, 10)),
    );
    toolbar.appendChild(this.sliceSlider);
    this.sliceLabel = el('span', 'slice-label');
    toolbar.appendChild(this.sliceLabel);

    for (const mode of ['positive', 'negative'] as const) {
      const btn = el('button', `mode-${mode}`);
      btn.textContent = mode === 'positive' ? '+ lesion' : '- background';
      btn.addEventListener('click', () => {
        this.state = { ...this.state, clickMode: mode };
        this.refreshControls();
      });
      this.modeButtons[mode] = btn;
      toolbar.appendChild(btn);
    }

    this.undoButton = el('button', 'undo-button');
    this.undoButton.textContent = 'undo';
    this.undoButton.addEventListener('click', () => void this.undo());
    toolbar.appendChild(this.undoButton);

    this.opacitySlider = el('input', 'opacity-slider');
    this.opacitySlider.type = 'range';
    this.opacitySlider.min = '0';
    this.opacitySlider.max = '100';
    this.opacitySlider.value = '40';
    this.opacitySlider.addEventListener('input', () => {
      this.state = { ...this.state, overlayOpacity: parseInt(this.opacitySlider.value, 10) / 100 };
      void this.renderSlice();
    });
    toolbar.appendChild(this.opacitySlider);

    this.zoomSelect = el('select', 'zoom-select');
    for (const z of ['0.5', '1', '2', '4', '8']) {
      const opt = el('option');
      opt.value = z;
      opt.textContent = `${z}x`;
      this.zoomSelect.appendChild(opt);
    }
    this.zoomSelect.value = '4';
    this.zoomSelect.addEventListener('change', () => {
      this.state = {
        ...this.state,
        view: { ...this.state.view, zoom: parseFloat(this.zoomSelect.value) },
      };
      void this.renderSlice();
    });
    toolbar.appendChild(this.zoomSelect);

    this.errorBanner = el('div', 'error-banner');
    this.errorBanner.style.display = 'none';

    this.canvas = el('canvas', 'slice-canvas');
    this.canvas.addEventListener('click', (ev) => void this.onCanvasClick(ev as MouseEvent));

    this.reportPanel = el('div', 'report-panel');
    this.dscPanel = el('div', 'dsc-panel');
    this.historyPanel = el('div', 'history-panel');

    const side = el('div', 'side-panel');
    side.appendChild(this.reportPanel);
    side.appendChild(this.dscPanel);
    side.appendChild(this.historyPanel);

    const mainRow = el('div', 'main-row');
    mainRow.appendChild(this.canvas);
    mainRow.appendChild(side);

    this.root.appendChild(toolbar);
    this.root.appendChild(this.errorBanner);
    this.root.appendChild(mainRow);
  }

  // -- lifecycle --------------------------------------------------------------
  async loadCases(): Promise<void> {
    const cases = await this.api.listCases();
    this.caseSelect.innerHTML = '';
    for (const c of cases) {
      const opt = this.doc.createElement('option');
      opt.value = c.id;
      opt.textContent = `${c.id} (${c.lesion_type || 'case'})`;
      this.caseSelect.appendChild(opt);
    }
    this.caseSelect.addEventListener('change', () => void this.openCase(this.caseSelect.value));
  }

  async openCase(caseId: string): Promise<void> {
    const summary = await this.api.createSession(caseId);
    this.state = withSession(this.state, summary);
    await this.renderSlice();
    this.refreshControls();
    this.renderReport();
  }

  switchAxis(axis: Axis): void {
    this.state = setAxis(this.state, axis);
    void this.renderSlice();
    this.refreshControls();
  }

  setSlice(index: number): void {
    this.state = setSliceIndex(this.state, index);
    void this.renderSlice();
    this.refreshControls();
  }

  // -- interactions -----------------------------------------------------------
  async onCanvasClick(ev: MouseEvent): Promise<void> {
    const summary = this.state.summary;
    if (!summary) return;
    const rect = this.canvas.getBoundingClientRect();
    const px = ev.clientX - rect.left;
    const py = ev.clientY - rect.top;
    const voxel = canvasToVoxel(
      px,
      py,
      this.state.axis,
      this.state.sliceIndex,
      this.state.view,
      summary.volume_shape,
    );
    if (!voxel) {
      this.toast('click outside the image');
      return;
    }
    this.state = { ...this.state, busy: true };
    this.refreshControls();
    try {
      const updated = await this.api.applyClick(summary.session_id, voxel, this.state.clickMode);
      this.state = withSummary({ ...this.state, busy: false }, updated);
      await this.renderSlice();
      this.renderReport();
    } catch (err) {
      this.state = { ...this.state, busy: false };
      this.showError(err instanceof Error ? err.message : String(err));
    }
    this.refreshControls();
  }

  async undo(): Promise<void> {
    const summary = this.state.summary;
    if (!summary || !canUndo(this.state)) return;
    this.state = { ...this.state, busy: true };
    this.refreshControls();
    try {
      const updated = await this.api.undo(summary.session_id);
      this.state = withSummary({ ...this.state, busy: false }, updated);
      await this.renderSlice();
      this.renderReport();
    } catch (err) {
      this.state = { ...this.state, busy: false };
      this.showError(err instanceof Error ? err.message : String(err));
    }
    this.refreshControls();
  }

  // -- rendering ---------------------------------------------------------------
  async renderSlice(): Promise<void> {
    const summary = this.state.summary;
    if (!summary) return;
    this.state = { ...this.state, sliceIndex: clampSliceIndex(this.state, this.state.sliceIndex) };
    let slice: SlicePayload;
    try {
      slice = await this.api.getSlice(summary.session_id, this.state.axis, this.state.sliceIndex);
    } catch (err) {
      this.showError(err instanceof Error ? err.message : String(err));
      return;
    }
    this.lastSlice = slice;
    this.errorBanner.style.display = 'none';

    const intensity = decodeBase64Bytes(slice.intensity_b64);
    const mask = decodeRle(slice.mask_rle);
    const rgba = composeSlice(
      intensity,
      mask,
      slice.width,
      slice.height,
      this.state.overlayOpacity,
      this.state.windowLevel,
    );
    this.lastComposed = rgba;

    const zoom = this.state.view.zoom;
    this.canvas.width = Math.max(1, Math.round(slice.width * zoom));
    this.canvas.height = Math.max(1, Math.round(slice.height * zoom));
    const ctx = this.canvas.getContext('2d');
    if (!ctx) return; // jsdom has no 2D context; tests read buffers directly
    const image = ctx.createImageData(slice.width, slice.height);
    image.data.set(rgba);
    const bitmapCanvas = this.doc.createElement('canvas');
    bitmapCanvas.width = slice.width;
    bitmapCanvas.height = slice.height;
    bitmapCanvas.getContext('2d')!.putImageData(image, 0, 0);
    ctx.imageSmoothingEnabled = false;
    ctx.clearRect(0, 0, this.canvas.width, this.canvas.height);
    ctx.drawImage(bitmapCanvas, 0, 0, this.canvas.width, this.canvas.height);
    this.drawMarkers(ctx);
  }

  private drawMarkers(ctx: CanvasRenderingContext2D): void {
    const summary = this.state.summary;
    if (!summary) return;
    for (const click of summary.clicks) {
      const pos = voxelToCanvas(click.coord, this.state.axis, this.state.sliceIndex, this.state.view);
      if (!pos) continue;
      ctx.strokeStyle = click.label === 'positive' ? '#00ff66' : '#ffcc00';
      ctx.lineWidth = 2;
      ctx.beginPath();
      ctx.moveTo(pos.x - 5, pos.y);
      ctx.lineTo(pos.x + 5, pos.y);
      if (click.label === 'positive') {
        ctx.moveTo(pos.x, pos.y - 5);
        ctx.lineTo(pos.x, pos.y + 5);
      }
      ctx.stroke();
    }
  }

  renderReport(): void {
    const summary = this.state.summary;
    if (!summary) return;
    const rows = Object.entries(summary.report)
      .map(([name, value]) => {
        const probs = (summary.probs[name] ?? [])
          .map((p) => `${Math.round(p * 100)}%`)
          .join(' / ');
        return `<tr><td class="attr-name">${name}</td><td class="attr-value">${value}</td><td class="attr-probs">${probs}</td></tr>`;
      })
      .join('');
    const iou = summary.iou_pred !== null ? summary.iou_pred.toFixed(3) : '-';
    this.reportPanel.innerHTML =
      `<h3>structured report</h3><table>${rows}</table>` +
      `<div class="iou-pred">predicted IoU: ${iou}</div>`;

    this.dscPanel.innerHTML = summary.has_ground_truth
      ? `<h3>DSC per click</h3><ol>${this.state.dscTrace
          .map((d) => `<li>${d === null ? '-' : d.toFixed(3)}</li>`)
          .join('')}</ol>`
      : '';

    this.historyPanel.innerHTML = `<h3>clicks</h3><ol class="click-history">${summary.clicks
      .map((c) => `<li>${c.label} @ (${c.coord.join(', ')})</li>`)
      .join('')}</ol>`;
  }

  refreshControls(): void {
    const summary = this.state.summary;
    this.undoButton.disabled = !canUndo(this.state);
    for (const axis of AXES) {
      this.axisButtons[axis].classList.toggle('active', this.state.axis === axis);
    }
    this.modeButtons.positive.classList.toggle('active', this.state.clickMode === 'positive');
    this.modeButtons.negative.classList.toggle('active', this.state.clickMode === 'negative');
    if (summary) {
      const count = sliceCount(this.state.axis, summary.volume_shape);
      this.sliceSlider.min = '0';
      this.sliceSlider.max = String(count - 1);
      this.sliceSlider.value = String(this.state.sliceIndex);
      const dims = sliceDims(this.state.axis, summary.volume_shape);
      this.sliceLabel.textContent = `${this.state.axis} ${this.state.sliceIndex + 1}/${count} (${dims.width}x${dims.height})`;
    }
  }

  toast(message: string): void {
    this.errorBanner.textContent = message;
    this.errorBanner.style.display = 'block';
    this.errorBanner.classList.add('toast');
  }

  showError(message: string): void {
    this.errorBanner.textContent = message;
    this.errorBanner.style.display = 'block';
    this.errorBanner.classList.remove('toast');
  }
}
