"""Independent reference values for the first SCA subproblem.

Two-user specific channel (gamma = 1, N_t = 2), P_t = 100, sigma^2 = 1,
threshold 0.1 for both users, kappa = 0.5, unit weights. Formulated from
scratch with cvxpy complex variables and solved with SCS.

    python first_iteration_reference.py 8        # theta = 8*pi/9, WSR subproblem
    python first_iteration_reference.py 2 slack  # theta = 2*pi/9, secrecy-slack subproblem

At theta = 2*pi/9 the starting point violates the thresholds, so the first
subproblem solved is the slack-minimizing one.
"""

import sys

import numpy as np
import cvxpy as cp

theta = int(sys.argv[1]) * np.pi / 9
slack_mode = len(sys.argv) > 2 and sys.argv[2] == "slack"
H = np.array([[1.0, 1.0], [1.0, np.exp(1j * theta)]])  # rows h_1, h_2
K, N = 2, 2
P_t, noise, r_th, kappa = 100.0, 1.0, 0.1, 0.5
u = np.ones(K)

# initial point
U, s, _ = np.linalg.svd(H.T)
pc0 = np.sqrt(kappa * P_t) * U[:, np.argmax(s)]
pk0 = [np.sqrt((1 - kappa) * P_t / K) * h / np.linalg.norm(h) for h in H]


def hp(h, p):
    return np.vdot(h, p)


beta_c0 = [sum(abs(hp(H[k], p)) ** 2 for p in pk0) + noise for k in range(K)]
beta_p0 = [sum(abs(hp(H[k], pk0[j])) ** 2 for j in range(K) if j != k) + noise for k in range(K)]
sinr_c0 = [abs(hp(H[k], pc0)) ** 2 / beta_c0[k] for k in range(K)]
c0 = min(np.log2(1 + x) for x in sinr_c0) / K
pairs = [(k, j) for k in range(K) for j in range(K) if j != k]
rho_w0 = {}
for k, j in pairs:
    den = sum(abs(hp(H[j], pk0[i])) ** 2 for i in range(K) if i not in (k, j)) + noise
    rho_w0[(k, j)] = abs(hp(H[j], pk0[k])) ** 2 / den
alpha_w0 = {key: np.log2(1 + v) for key, v in rho_w0.items()}

pc = cp.Variable(N, complex=True)
pk = [cp.Variable(N, complex=True) for _ in range(K)]
c = cp.Variable(K)
a_c, a_p = cp.Variable(K), cp.Variable(K)
b_c, b_p = cp.Variable(K), cp.Variable(K)
r_c, r_p = cp.Variable(K), cp.Variable(K)
a_w = {key: cp.Variable() for key in pairs}
r_w = {key: cp.Variable() for key in pairs}

slack = {key: cp.Variable(nonneg=True) for key in pairs}

cons = [c >= 0]
for k, j in pairs:
    cons.append(a_p[k] - a_w[(k, j)] + (slack[(k, j)] if slack_mode else 0) >= r_th)
    t = 2 ** alpha_w0[(k, j)]
    cons.append(1 + r_w[(k, j)] <= t * (1 + np.log(2) * (a_w[(k, j)] - alpha_w0[(k, j)])))
    # the interference sum over k' != k, j is empty for two users
    cons.append(r_w[(k, j)] * noise >= cp.square(cp.abs(H[j].conj() @ pk[k])))
for k in range(K):
    h = H[k]
    cons.append(cp.sum(c) <= a_c[k])
    cons.append(cp.constraints.ExpCone(a_c[k] * np.log(2), 1, 1 + r_c[k]))
    cons.append(cp.constraints.ExpCone(a_p[k] * np.log(2), 1, 1 + r_p[k]))
    cons.append(sum(cp.square(cp.abs(h.conj() @ p)) for p in pk) + noise <= b_c[k])
    cons.append(sum(cp.square(cp.abs(h.conj() @ pk[j])) for j in range(K) if j != k) + noise <= b_p[k])
    for p, p0, b, b0, r in ((pc, pc0, b_c, beta_c0, r_c), (pk[k], pk0[k], b_p, beta_p0, r_p)):
        a0 = hp(h, p0)
        lin = 2 * cp.real(np.conj(a0) * (h.conj() @ p)) / b0[k] - abs(a0) ** 2 * b[k] / b0[k] ** 2
        cons.append(lin >= r[k])
cons.append(cp.sum_squares(cp.hstack([pc] + pk)) <= P_t)

if slack_mode:
    prob = cp.Problem(cp.Minimize(sum(slack.values())), cons)
else:
    prob = cp.Problem(cp.Maximize(u @ (c + a_p)), cons)
prob.solve(solver=cp.SCS, eps_abs=1e-10, eps_rel=1e-10, max_iters=200000)
print(prob.status)
print(f"{prob.value:.10f}")
