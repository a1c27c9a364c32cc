"""Wider convolutional baseline that keeps spatial detail until the head."""

import torch
import torch.nn as nn
import torch.nn.functional as F


def seed_everything(seed):
    torch.manual_seed(seed)
    return seed


class Net(nn.Module):
    """Conv block with batchnorm feeding a wide linear head."""
    def __init__(self):
        super().__init__()
        self.conv1 = nn.Conv2d(3, 64, 3)
        self.bn1 = nn.BatchNorm2d(64)
        self.fc = nn.Linear(64 * 30 * 30, 10)
        self.act = nn.ReLU()

    def weight_count(self):
        return sum(p.numel() for p in self.parameters())

    def forward(self, x):
        x = F.relu(self.bn1(self.conv1(x)))
        x = x.view(x.size(0), -1)
        return self.fc(x)


def build_model():
    return Net()
