"""Hyperparameter sensitivity: 2^3 full factorial over (U, gamma, lambda)
with a three-way ANOVA on the achieved MAPE.

Uses a deliberately small trained model so the whole study runs in a couple
of minutes; interactions are reported alongside the main effects.

Run:  python3 demos/05_doe_anova.py
"""

from diffdesign import diffusion, guidance, repaint
from diffdesign.designs import ConditionVector, SyntheticDesignProblem, mask_from_spec, synth_generate
from diffdesign.evalkit import DoePlan, anova3, doe_run, mape

problem = SyntheticDesignProblem()
train = synth_generate(problem, 1500, seed=0)

model = diffusion.build_model(problem.dim, ("target",), width=96, blocks=1, seed=0)
diffusion.train(model, train.x, train.perf[:, None],
                diffusion.TrainConfig(epochs=150, lr_final=5e-5, seed=0))
gcfg = guidance.GuidanceTrainConfig(epochs=100, time_dim=model.embed_dim,
                                    schedule=model.schedule, predictor_width=96, seed=0)
predictor = guidance.train_predictor(train.x, train.perf, gcfg, x_stats=model.x_stats)
mixed = synth_generate(problem, 1500, seed=1, feasible_only=False)
classifier = guidance.train_classifier(mixed.x, mixed.feasible, gcfg, x_stats=model.x_stats)

reference = train.x[0]
target = float(problem.performance(reference))
mask = mask_from_spec(problem.dim, "0-3")


def run_case(factors, seed):
    g = guidance.GuidanceConfig(gamma=factors["gamma"], lambda_=factors["lambda"],
                                target=target, classifier=classifier, predictor=predictor)
    out = repaint.repaint_sample(model, g, reference, mask, ConditionVector(target),
                                 repaint.RepaintConfig(resample_u=int(factors["U"]), seed=seed),
                                 16)
    return mape(problem.performance(out), target)


plan = DoePlan({"lambda": (0.3, 0.7), "gamma": (0.3, 0.7), "U": (20, 30)},
               replicates=2, seed=0)
print("running 16 factorial cases (this is the slow part)...")
rows = doe_run(plan, run_case)
for r in sorted(rows, key=lambda r: r["run"]):
    f = r["factors"]
    print(f"  run {r['run']:2d}: U={f['U']:<2} gamma={f['gamma']} lambda={f['lambda']} "
          f"rep {r['replicate']} -> MAPE {r['response']:.2f}%")

table = anova3(rows)
print(f"\n{'source':>16} {'SS':>10} {'df':>3} {'F':>10} {'p':>8}  significant")
for row in table.rows:
    print(f"{row.source:>16} {row.ss:10.4f} {row.df:3d} {row.f:10.3f} "
          f"{row.p:8.4f}  {'yes' if row.significant else 'no'}")
print(f"\npartition gap: {table.partition_gap():.2e} (SS_total == sum of parts)")
