"""Regenerate the bundled MAC manifests.

MobileNet V2 and ResNet50 come from torchvision's definitions; MobileNet V1
(not in torchvision) is built from its standard layer table. Input 224x224.
Columns: name,role,macs,params,fp_params where fp_params counts biases and
batch-norm affine parameters.
"""

import sys
from pathlib import Path

import torch
import torch.nn as nn
import torchvision


def mobilenet_v1():
    cfg = [(64, 1), (128, 2), (128, 1), (256, 2), (256, 1), (512, 2),
           (512, 1), (512, 1), (512, 1), (512, 1), (512, 1), (1024, 2), (1024, 1)]

    def conv_bn(i, o, k, s, g):
        return [nn.Conv2d(i, o, k, s, k // 2, groups=g, bias=False), nn.BatchNorm2d(o), nn.ReLU()]

    layers = conv_bn(3, 32, 3, 2, 1)
    c = 32
    for o, s in cfg:
        layers += conv_bn(c, c, 3, s, c)
        layers += conv_bn(c, o, 1, 1, 1)
        c = o
    return nn.Sequential(*layers, nn.AdaptiveAvgPool2d(1), nn.Flatten(), nn.Linear(1024, 1000))


def manifest(model):
    rows = []
    bn_of = {}
    prev = None
    for name, m in model.named_modules():
        if isinstance(m, (nn.Conv2d, nn.Linear)):
            prev = name
        elif isinstance(m, nn.BatchNorm2d) and prev is not None:
            bn_of[prev] = m
            prev = None

    def hook(name):
        def f(m, x, y):
            if isinstance(m, nn.Conv2d):
                k = m.kernel_size[0] * m.kernel_size[1]
                macs = y.shape[1] * y.shape[2] * y.shape[3] * (m.in_channels // m.groups) * k
            else:
                macs = m.in_features * m.out_features
            fp = (m.bias.numel() if m.bias is not None else 0)
            if name in bn_of:
                fp += 2 * bn_of[name].num_features
            rows.append([name, macs, m.weight.numel(), fp])
        return f

    for name, m in model.named_modules():
        if isinstance(m, (nn.Conv2d, nn.Linear)):
            m.register_forward_hook(hook(name))
    model.eval()
    with torch.no_grad():
        model(torch.zeros(1, 3, 224, 224))
    out = ["name,role,macs,params,fp_params"]
    for i, (name, macs, params, fp) in enumerate(rows):
        role = "first" if i == 0 else "last" if i == len(rows) - 1 else "interior"
        if name.isdigit():
            name = "fc" if role == "last" else f"conv{i}"
        out.append(f"{name},{role},{macs},{params},{fp}")
    return "\n".join(out) + "\n"


if __name__ == "__main__":
    here = Path(sys.argv[1] if len(sys.argv) > 1 else Path(__file__).parent)
    models = {
        "mobilenet_v1": mobilenet_v1(),
        "mobilenet_v2": torchvision.models.mobilenet_v2(),
        "resnet50": torchvision.models.resnet50(),
    }
    for name, model in models.items():
        (here / f"{name}.csv").write_text(manifest(model))
