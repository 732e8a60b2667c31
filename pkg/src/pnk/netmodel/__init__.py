"""Topologies, routing schemes, failure models and assembled network models."""

from .models import (INF, FailureModel, FailureSpec, Model, ModelError, ModelSpec, assemble,
                     chain_model, fail_flags, failure_program, fattree_model, running_model,
                     running_policy, teleport)
from .routing import SCHEMES, increment, topology_program, validation_report

# ``routing`` the function stays in its module so the submodule name is not shadowed
from .topology import (Link, Node, Topology, TopologyError, gen_ab_fattree, gen_chain, gen_fattree,
                       gen_running, isomorphic, load_dot, to_dot)
