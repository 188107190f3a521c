"""Job-shop scheduling: propagation engine, exact + LNS search, generator,
benchmark harness."""

from .accel import backend_name, using_numba
from .bench import (RunResult, brute_force_optimum, classic_optima,
                    published_optimum, read_results_csv, render_table,
                    run_benchmark, score_complete, score_pair,
                    write_results_csv)
from .engine import (DomainStore, FlatProblem, IntervalVar, MachinePosting,
                     fixpoint, propagate_disjunctive, propagate_precedence)
from .generator import (Certificate, GeneratorError, GeneratorSpec,
                        generate_instance, validate_certificate)
from .instance import (Instance, InstanceError, Job, Operation, ParseError,
                       Solution, ValidationResult, classic_names,
                       load_classic, lower_bound, make_instance,
                       parse_instance, parse_instance_file,
                       validate_solution, write_instance)
from .search import (Decision, Incumbent, SearchConfig, SearchStats,
                     branch_set_times, lns_relax, preset, solve, solve_exact)

__version__ = "0.1.0"
