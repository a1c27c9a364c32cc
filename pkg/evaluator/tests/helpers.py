"""Request builders shared by the worker tests."""

BROKEN_SOURCE = "def f(:\n"

_LAYER_SIZES = {
    "mnist": (784, 10),
    "celeba": (4096, 2),
    "svhn": (3072, 10),
    "cifar10": (3072, 10),
    "imagenette": (50176, 10),
    "cifar100": (3072, 100),
}


def model_source(dataset, tag=""):
    width, classes = _LAYER_SIZES[dataset]
    lines = [
        "import torch.nn as nn",
        "",
        "",
        "class Net(nn.Module):",
        "    def __init__(self):",
        "        super().__init__()",
        f"        self.body = nn.Linear({width}, {classes})",
        "",
        "    def forward(self, x):",
        "        return self.body(x.flatten(1))",
    ]
    if tag:
        lines.append(f"# {tag}")
    return "\n".join(lines) + "\n"


def make_request(
    index=0, dataset="cifar10", source=None, eval_seed=None, mode=None
):
    request = {
        "candidate_id": f"cand-0000-{index:04d}",
        "patched_source": model_source(dataset) if source is None else source,
        "dataset": dataset,
        "hp": {"batch": 64, "lr": 0.01},
        "transform_ref": "transforms.ToTensor()",
        "eval_seed": 500 + index if eval_seed is None else eval_seed,
    }
    if mode is not None:
        request["mode"] = mode
    return request
