"""Services package"""
from .expr_core import Alphabet, Dataset, ExpressionTree, make_alphabet, mse_fitness
from .kexpression import Gene, decode, parse_gene
from .neuro_encoder import NeuroEncoder, generate_gene
from .optimizers import Objective, BestSoFar, ga_minimize, pso_minimize, cmaes_minimize
from .gep_baseline import gep_evolve
from .benchmarks import BENCHMARKS, get_benchmark, list_benchmarks
from .stats import median_and_std, wilcoxon_rank_sum, rank_table
from .experiment import run_trial, run_suite
