"""Binary detector architectures for single-channel count images."""

from __future__ import annotations

import torch
from torch import nn
from torchvision import models

ARCHITECTURES = ("resnet18", "vgg16", "alexnet")


def build_model(arch: str = "resnet18", init_seed: int = 0) -> nn.Module:
    """Construct a 2-class network with a 1-channel input convolution.

    The global torch seed is set from init_seed before construction, so
    identical seeds give bit-identical initial weights.  The replacement
    first convolution is He-initialized; ResNet's pre-head pooling is
    already adaptive average pooling, so any input size that survives the
    stride chain is accepted.
    """
    if arch not in ARCHITECTURES:
        raise ValueError(f"arch must be one of {ARCHITECTURES}, got {arch!r}")
    torch.manual_seed(init_seed)
    if arch == "resnet18":
        model = models.resnet18(num_classes=2)
        conv = nn.Conv2d(1, 64, kernel_size=7, stride=2, padding=3, bias=False)
        nn.init.kaiming_normal_(conv.weight, mode="fan_out", nonlinearity="relu")
        model.conv1 = conv
        return model
    if arch == "vgg16":
        model = models.vgg16(num_classes=2)
        conv = nn.Conv2d(1, 64, kernel_size=3, padding=1)
        nn.init.kaiming_normal_(conv.weight, mode="fan_out", nonlinearity="relu")
        nn.init.zeros_(conv.bias)
        model.features[0] = conv
        return model
    model = models.alexnet(num_classes=2)
    conv = nn.Conv2d(1, 64, kernel_size=11, stride=4, padding=2)
    nn.init.kaiming_normal_(conv.weight, mode="fan_out", nonlinearity="relu")
    nn.init.zeros_(conv.bias)
    model.features[0] = conv
    return model
