import { ApiClient } from "./api.js";
import { App } from "./ui.js";

const base = window.location.origin;
const root = document.getElementById("app");
if (!root) throw new Error("missing #app root element");
new App(root, new ApiClient(base));
