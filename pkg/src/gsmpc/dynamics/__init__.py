"""Graph construction, message-passing dynamics, Chamfer training, rollouts."""
from .graph import OMEGA, SceneGraph, build_graph, node_features, permute_graph, radius_edges
from .model import DynamicsModel, GraphConv, apply, predict, rollout
from .train import TrainConfig, Transition, batch_loss, chamfer_loss, evaluate, train
