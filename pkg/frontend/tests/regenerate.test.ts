import { describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";
import {
  GUIDANCE_DEFAULTS,
  createRegenerateControls,
  renderComparison,
} from "../src/regenerate.js";
import type { GuidanceParams, ReviewItem } from "../src/types.js";
import { makeFetchStub } from "./helpers.js";

import itemRegenerated from "./fixtures/item_regenerated.json";
import errorValidation from "./fixtures/error_validation.json";

const regenerated = itemRegenerated as unknown as ReviewItem;

function setup() {
  const form = document.createElement("form");
  const panel = document.createElement("div");
  panel.hidden = true;
  document.body.append(form, panel);
  return { form, panel };
}

describe("createRegenerateControls", () => {
  it("prefills the sliders with the service's default guidance parameters", () => {
    const { form } = setup();
    const controls = createRegenerateControls(form, () => {});
    expect(controls.getParams()).toEqual({ alpha: 0.01, beta: 3.0, gamma: 1.3 });
    expect(GUIDANCE_DEFAULTS).toEqual({ alpha: 0.01, beta: 3.0, gamma: 1.3 });
  });

  it("does not allow guidance strength below 1", () => {
    const { form } = setup();
    createRegenerateControls(form, () => {});
    const gamma = form.querySelector<HTMLInputElement>('input[name="gamma"]')!;
    expect(Number(gamma.min)).toBe(1.0);
    gamma.value = "0.2"; // range inputs clamp to min
    expect(Number(gamma.value)).toBeGreaterThanOrEqual(1.0);
  });

  it("passes the current slider values to the submit handler", () => {
    const { form } = setup();
    const seen: GuidanceParams[] = [];
    createRegenerateControls(form, (params) => seen.push(params));
    form.querySelector<HTMLInputElement>('input[name="beta"]')!.value = "5";
    form.dispatchEvent(new Event("submit"));
    expect(seen).toEqual([{ alpha: 0.01, beta: 5, gamma: 1.3 }]);
  });
});

describe("regenerate round trip", () => {
  it("updates the comparison panel from the service response", async () => {
    const { form, panel } = setup();
    const { fetchFn, calls } = makeFetchStub([
      { method: "POST", path: "/v1/items/item0/regenerate", body: itemRegenerated },
    ]);
    const client = new ApiClient("", fetchFn);

    let done: Promise<void> = Promise.resolve();
    createRegenerateControls(form, (params) => {
      done = client.regenerate("item0", params).then((item) => renderComparison(panel, item));
    });
    expect(panel.hidden).toBe(true);

    form.dispatchEvent(new Event("submit"));
    await done;

    expect(calls[0].body).toEqual({ alpha: 0.01, beta: 3.0, gamma: 1.3 });
    expect(panel.hidden).toBe(false);
    expect(panel.querySelector(".answer-initial")?.textContent).toBe("lesion0");
    expect(panel.querySelector(".answer-regenerated")?.textContent).toBe("finding0");
    const sections = panel.querySelectorAll("section");
    expect(sections).toHaveLength(2);
    expect(sections[0].querySelectorAll(".token-cell")).toHaveLength(
      regenerated.initial_token_probs.length,
    );
    expect(sections[1].querySelectorAll(".token-cell")).toHaveLength(
      regenerated.regenerated_token_probs!.length,
    );
    expect(panel.querySelector(".guidance-used")?.textContent).toBe("α=0.01 β=3 γ=1.3");
  });

  it("leaves the comparison panel hidden when the service rejects the request", async () => {
    const { form, panel } = setup();
    const { fetchFn } = makeFetchStub([
      {
        method: "POST",
        path: "/v1/items/item0/regenerate",
        status: errorValidation.status,
        body: errorValidation.body,
      },
    ]);
    const client = new ApiClient("", fetchFn);

    let failure: unknown = null;
    let done: Promise<void> = Promise.resolve();
    createRegenerateControls(form, (params) => {
      done = client
        .regenerate("item0", params)
        .then((item) => renderComparison(panel, item))
        .catch((err: unknown) => {
          failure = err;
        });
    });
    form.dispatchEvent(new Event("submit"));
    await done;

    expect(failure).toBeInstanceOf(ApiError);
    expect(panel.hidden).toBe(true);
    expect(panel.textContent).toBe("");
  });
});
