"""Central finite-difference check of the loss gradient, per parameter group."""

import torch

from ecqed.trainer import ECQEDModel, TrainConfig, compute_loss, gold_targets

from conftest import make_dialog

GROUPS = {
    "speaker table": ("speakers.",),
    "graph conv": ("rgcn.",),
    "cln": ("scorer.cln.",),
    "mlp": ("scorer.mlp.",),
    "biaffine projections": ("scorer.biaffine.proj_",),
    "biaffine U/W/b": ("scorer.biaffine.U", "scorer.biaffine.W", "scorer.biaffine.b"),
}


def gradient_relative_errors(dim=8, n=4, step=1e-6, seed=0):
    torch.manual_seed(seed)
    cfg = TrainConfig(encoder=f"toy:{dim}:0", hidden_size=dim, dropout=0.0, seed=seed)
    model = ECQEDModel(cfg).double().eval()
    with torch.no_grad():
        for p in model.parameters():
            p.add_(0.05 * torch.randn_like(p))
    d = make_dialog(n, [(1, 1, "SU", "N"), (2, 1, "SA", "I"), (4, 2, "AG", "H"), (4, 4, "AG", "N")], speakers="ABA")
    X = torch.randn(n, dim, dtype=torch.float64)
    gold = gold_targets(d)

    def loss_fn():
        return compute_loss(model.score_features(d, X), gold)

    model.zero_grad()
    loss_fn().backward()
    named = dict(model.named_parameters())
    errors = {}
    for group, prefixes in GROUPS.items():
        params = [p for name, p in named.items() if name.startswith(prefixes)]
        assert params, group
        analytic, numeric = [], []
        with torch.no_grad():
            for p in params:
                analytic.append(p.grad.detach().clone().reshape(-1))
                flat = p.view(-1)
                num = torch.empty_like(flat)
                for i in range(flat.numel()):
                    orig = flat[i].item()
                    flat[i] = orig + step
                    up = loss_fn().item()
                    flat[i] = orig - step
                    down = loss_fn().item()
                    flat[i] = orig
                    num[i] = (up - down) / (2 * step)
                numeric.append(num)
        a, nm = torch.cat(analytic), torch.cat(numeric)
        scale = max(a.norm().item(), nm.norm().item())
        errors[group] = 0.0 if scale < 1e-12 else (a - nm).norm().item() / scale
    return errors
