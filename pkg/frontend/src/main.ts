import { HttpApi } from "./api.js";
import { App } from "./app.js";

const app = new App(new HttpApi(""));
document.getElementById("app")?.appendChild(app.root);
void app.bootstrap();
