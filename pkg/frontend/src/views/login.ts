export interface LoginViewOptions {
  onSubmit: (username: string, secret: string) => Promise<void>;
}

export function renderLogin(container: HTMLElement, options: LoginViewOptions): void {
  container.innerHTML = "";
  const form = document.createElement("form");
  form.className = "login-form";
  form.innerHTML = `
    <h2>Sign in</h2>
    <label>Username <input name="username" autocomplete="username" required></label>
    <label>Password <input name="secret" type="password" autocomplete="current-password" required></label>
    <button type="submit">Log in</button>
    <p class="error" role="alert" hidden></p>
  `;
  const error = form.querySelector<HTMLParagraphElement>(".error")!;
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const data = new FormData(form);
    error.hidden = true;
    options
      .onSubmit(String(data.get("username")), String(data.get("secret")))
      .catch((err: Error) => {
        error.textContent = err.message || "login failed";
        error.hidden = false;
      });
  });
  container.appendChild(form);
}
