"""Face-attribute classifier over 64x64 RGB crops."""

import torch
import torch.nn as nn
import torch.nn.functional as F


class Net(nn.Module):
    """Three strided conv stages and a binary-attribute head."""

    def __init__(self, num_attrs=2):
        super().__init__()
        self.conv1 = nn.Conv2d(3, 32, 3, stride=2, padding=1)
        self.conv2 = nn.Conv2d(32, 64, 3, stride=2, padding=1)
        self.conv3 = nn.Conv2d(64, 128, 3, stride=2, padding=1)
        self.head = nn.Linear(128, num_attrs)

    def forward(self, x):
        x = F.relu(self.conv1(x))
        x = F.relu(self.conv2(x))
        x = F.relu(self.conv3(x))
        x = F.adaptive_avg_pool2d(x, 1)
        x = torch.flatten(x, 1)
        return self.head(x)


def build_model():
    return Net()
