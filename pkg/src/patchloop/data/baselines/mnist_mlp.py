"""Two-layer perceptron for 28x28 grayscale digit classification."""

import torch
import torch.nn as nn

INPUT_DIM = 28 * 28
HIDDEN_DIM = 256
NUM_CLASSES = 10


class Net(nn.Module):
    """Flatten, one hidden layer with ReLU, linear head."""

    def __init__(self):
        super().__init__()
        self.flatten = nn.Flatten()
        self.fc1 = nn.Linear(INPUT_DIM, HIDDEN_DIM)
        self.act = nn.ReLU()
        self.fc2 = nn.Linear(HIDDEN_DIM, NUM_CLASSES)

    def forward(self, x):
        x = self.flatten(x)
        x = self.act(self.fc1(x))
        return self.fc2(x)


def build_model():
    return Net()


def param_count(model):
    return sum(p.numel() for p in model.parameters() if p.requires_grad)
