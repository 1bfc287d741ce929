"""The prompt-based forecasting path, end to end with the offline stub.

A role-based prompt serializes one user's record into four data sections;
the provider answers with a JSON forecast; lenient parsing tolerates prose
around the payload. The sweep scores every (user, stage) pair and never
aborts on a bad response.
"""

from evolvex.graphgen import GeneratorConfig, generate, split_dataset
from evolvex.promptgen import StubProvider, build_prompt, evaluate_llm_path, parse_response

ds = generate(GeneratorConfig(n_users=12, n_steps=8, post_rate=8.0), seed=5)
conditioning, _ = split_dataset(ds, 4)

bundle = build_prompt(user=2, ds=conditioning, stage=1)
print("=" * 70)
print(bundle.text[:1200])
print("... [prompt continues]")
print("=" * 70)

stub = StubProvider(ds.n_users, ds.n_categories)
response = stub.complete(bundle)
print("\nstub response:")
print(response)

forecast = parse_response(response, ds.n_users, ds.n_categories)
print("parsed connections:", forecast.connections)
print("parsed stage:", forecast.stage)

report = evaluate_llm_path(ds, stub, horizon=4, seed=5)
print("\nfull sweep over 12 users x 4 stages:")
print(report.table())
print(f"parse_failures    {report.parse_failures}")
