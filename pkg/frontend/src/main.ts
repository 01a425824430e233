import { ApiClient } from "./api.js";
import { createEditPanel } from "./panels/edit.js";
import { createHeatmapPanel } from "./panels/heatmap.js";
import { createInterpolatePanel } from "./panels/interpolate.js";
import { createMixPanel } from "./panels/mix.js";
import { createUploadPanel } from "./panels/upload.js";
import { EncodeResponse } from "./types.js";

const client = new ApiClient(
  new URLSearchParams(location.search).get("api") ?? "http://127.0.0.1:8000",
);

const app = document.getElementById("app")!;
const upload = createUploadPanel(client);
const edit = createEditPanel(client);
const mix = createMixPanel(client);
const interp = createInterpolatePanel(client);
const heatmap = createHeatmapPanel();
for (const p of [upload, edit, mix, interp, heatmap]) app.appendChild(p.root);

const sessions: { a?: EncodeResponse; b?: EncodeResponse } = {};

upload.onEncoded((slot, session, reconstructUrl) => {
  sessions[slot] = session;
  if (slot === "a") edit.setSession(session, reconstructUrl);
  if (sessions.a && sessions.b) {
    mix.setSessions(sessions.a.session_id, sessions.b.session_id, sessions.a.L);
    interp.setSessions(sessions.a.session_id, sessions.b.session_id, sessions.a.L);
  }
});

client
  .attributes()
  .then((attrs) => {
    edit.setAttributes(attrs);
    heatmap.setAttributes(attrs);
  })
  .catch((err) => {
    console.error("failed to list attributes", err);
  });
