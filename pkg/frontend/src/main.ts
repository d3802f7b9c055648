import { ApiClient } from "./api";
import { App } from "./app";
import "./style.css";

const root = document.getElementById("app");
if (!root) throw new Error("missing #app root element");

const app = new App(root, new ApiClient());
void app.start();
