"""
Learning the noise scale
========================

Sigma sets how strongly the balancing term pushes predictions away from
frequent labels. Stored as log sigma, it is trained jointly with the model.
The data below have unit label noise; starting from very different values the
learned sigma ends up near 1.
"""
from balanced_mse import Adam, TrainConfig, fit_gmm, train
from balanced_mse.bench import OracleFn, generate, label_dist

data = generate(label_dist("normal", "moderate"), OracleFn("linear"), 1024, seed=4)
prior = fit_gmm(data.y, 2, seed=4)

for sigma0 in (0.2, 1.0, 5.0):
    config = TrainConfig(loss="gai", optimizer=Adam(0.05), epochs=300, sigma=sigma0, learn_sigma=True)
    model, trace = train(data, config, prior)
    checkpoints = ", ".join(f"{trace.sigma[e]:.3f}" for e in (0, 9, 49, 299))
    print(f"sigma0={sigma0:4.1f}  sigma after epochs 1/10/50/300: {checkpoints}  "
          f"slope {model.weights[0][0, 0]:.3f}")
