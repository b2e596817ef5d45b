// Browser entry point. Query parameters select the service and session:
//   index.html?api=http://127.0.0.1:8000&session=<id>

import { ApiClient } from "./api.js";
import { TuningApp } from "./app.js";

function bootstrap(): void {
    const params = new URLSearchParams(window.location.search);
    const api = params.get("api") ?? "http://127.0.0.1:8000";
    const sessionId = params.get("session");
    const root = document.getElementById("app");
    if (root === null) throw new Error("missing #app container");
    if (sessionId === null) {
        root.textContent = "add ?session=<id> (and optionally &api=<url>) to the page URL";
        return;
    }
    const app = new TuningApp(new ApiClient(api), sessionId, document, root);
    app.start().catch((err) => {
        root.textContent = `failed to load session: ${String(err)}`;
    });
}

bootstrap();
