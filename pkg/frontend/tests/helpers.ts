/** Shared test helpers: a fetch stub that serves recorded service responses. */

export interface RecordedCall {
  url: string;
  method: string;
  body: unknown;
}

export interface StubRoute {
  method: string;
  path: string;
  status?: number;
  body: unknown;
}

export function makeFetchStub(routes: StubRoute[]) {
  const calls: RecordedCall[] = [];
  const fetchFn = async (input: string, init?: RequestInit): Promise<Response> => {
    const method = init?.method ?? "GET";
    const body = init?.body ? JSON.parse(String(init.body)) : null;
    calls.push({ url: input, method, body });
    const route = routes.find((r) => r.method === method && input.startsWith(r.path));
    if (!route) {
      return new Response(JSON.stringify({ code: "not_found", message: `no stub for ${input}` }), {
        status: 404,
        headers: { "Content-Type": "application/json" },
      });
    }
    return new Response(JSON.stringify(route.body), {
      status: route.status ?? 200,
      headers: { "Content-Type": "application/json" },
    });
  };
  return { fetchFn, calls };
}
