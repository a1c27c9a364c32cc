"""Ten-class natural-image classifier over 160x160 RGB inputs."""

import torch
import torch.nn as nn
import torch.nn.functional as F


def conv_block(cin, cout, stride):
    return nn.Sequential(
        nn.Conv2d(cin, cout, 3, stride=stride, padding=1),
        nn.BatchNorm2d(cout),
        nn.ReLU(inplace=True),
    )


class Net(nn.Module):
    """Four downsampling blocks and a pooled linear head."""

    def __init__(self):
        super().__init__()
        self.stem = conv_block(3, 32, 2)
        self.stage1 = conv_block(32, 64, 2)
        self.stage2 = conv_block(64, 128, 2)
        self.stage3 = conv_block(128, 256, 2)
        self.head = nn.Linear(256, 10)

    def forward(self, x):
        x = self.stem(x)
        x = self.stage1(x)
        x = self.stage2(x)
        x = self.stage3(x)
        x = F.adaptive_avg_pool2d(x, 1)
        x = torch.flatten(x, 1)
        return self.head(x)


def build_model():
    return Net()
