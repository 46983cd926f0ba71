// Basic account page that first reports a telemetry beacon carrying a
// fresh random token, so the beacon URL never matches the recording.
(() => {
    async function boot() {
        try {
            await fetch(`/beacon?token=${Math.random().toString(36).slice(2, 10)}`);
        }
        catch {
            // telemetry is best-effort
        }
        const reply = await fetch("/api/data");
        const data = await reply.json();
        const features = data.features.map((f) => `<li>${f}</li>`).join("");
        const root = document.getElementById("root");
        root.innerHTML = [
            '<div id="main">',
            `<h1>${data.user.name}</h1>`,
            `<p class="balance">${data.account.balance} ${data.account.currency}</p>`,
            `<ul class="features">${features}</ul>`,
            "</div>",
        ].join("");
    }
    boot().catch((err) => reportError(err));
})();
