"""Exact solvers for budgeted prize-collecting covering tour and tree problems.

Submodules:
  instance     problem data model, validation, generator
  fileio       TSPLIB-style base parsing, solution documents, bench tables
  lp_engine    bounded-variable revised simplex
  formulation  MIP column/row builders (compact and Benders master)
  separation   connectivity / min-cut / symmetry cut generation
  benders      combinatorial feasibility subproblem and dual rays
  bnc          branch-and-cut driver
  oracle       exhaustive reference solver for small instances
  cli          command-line entry point
"""

__version__ = "0.1.0"
