import { ApiClient } from './api';
import { ReviewController } from './controller';
import { mount } from './ui';

const params = new URLSearchParams(window.location.search);
const reviewer = params.get('reviewer') ?? 'curator';
const token = params.get('token') ?? undefined;

const controller = new ReviewController(new ApiClient('', reviewer, token));
mount(document.getElementById('app') as HTMLElement, controller);
void controller.start();

// Periodic retry in case the browser never fires an online event.
setInterval(() => {
  if (controller.pendingCount() > 0) void controller.flushPending();
}, 5000);
