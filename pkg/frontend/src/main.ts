// Entry point: service picker, mode picker, then the form-filling loop.

import { Api } from "./api.js";
import { ClientSession, runSessionView } from "./session.js";

const MODES = [
  { value: "offline", label: "Offline (complete form at once)" },
  { value: "initial-interaction", label: "Initial interaction (prefilled)" },
  { value: "runtime-interaction", label: "Run-time interaction (step by step)" },
];

async function boot(): Promise<void> {
  const root = document.getElementById("app");
  if (!root) {
    return;
  }
  const api = new Api("");
  const services = await api.listServices();

  const picker = document.createElement("form");
  picker.className = "fw-picker";

  const serviceSelect = document.createElement("select");
  serviceSelect.name = "service";
  for (const service of services) {
    const option = document.createElement("option");
    option.value = service.serviceName;
    option.textContent = service.title;
    serviceSelect.appendChild(option);
  }

  const citizenInput = document.createElement("input");
  citizenInput.type = "text";
  citizenInput.name = "citizen";
  citizenInput.value = "C1";

  const modeSelect = document.createElement("select");
  modeSelect.name = "mode";
  for (const mode of MODES) {
    const option = document.createElement("option");
    option.value = mode.value;
    option.textContent = mode.label;
    modeSelect.appendChild(option);
  }
  modeSelect.value = "runtime-interaction";

  const startButton = document.createElement("button");
  startButton.type = "submit";
  startButton.textContent = "Start";

  picker.append(
    labelled("Service", serviceSelect),
    labelled("Citizen id", citizenInput),
    labelled("Generator", modeSelect),
    startButton,
  );
  root.replaceChildren(picker);

  picker.addEventListener("submit", (event) => {
    event.preventDefault();
    const session = new ClientSession(api, serviceSelect.value, modeSelect.value, citizenInput.value);
    void session
      .start()
      .then(() => runSessionView(root, session))
      .catch((error) => {
        const note = document.createElement("div");
        note.className = "fw-error";
        note.textContent = String(error);
        picker.prepend(note);
      });
  });
}

function labelled(text: string, control: HTMLElement): HTMLLabelElement {
  const label = document.createElement("label");
  label.textContent = `${text}: `;
  label.appendChild(control);
  return label;
}

void boot();
