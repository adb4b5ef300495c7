from .gridsolver import GridSolver
from .particlesolver import ParticleSolver


solver_full_list = [
    GridSolver,
    ParticleSolver,
]

solver_dict = {s.solver_name: s for s in solver_full_list}


def available_solvers():
    '''
    Lists available solvers.
    '''
    return sorted(list(solver_dict.keys()))


def _get_solver_class(solver_name_or_class):
    if isinstance(solver_name_or_class, str):
        if solver_name_or_class not in solver_dict:
            raise ValueError(f'Unknown solver {solver_name_or_class}, available: {available_solvers()}')
        return solver_dict[solver_name_or_class]
    elif solver_name_or_class in solver_full_list:
        return solver_name_or_class
    else:
        raise (ValueError('Unknown solver'))


def get_default_params(solver_name_or_class):
    '''
    Returns default parameters for the specified solver.

    Parameters
    ----------
    solver_name_or_class: str or SolverClass
        The solver to retrieve default parameters from

    Returns
    -------
    default_params: dict
        Dictionary with default params for the specified solver
    '''
    return _get_solver_class(solver_name_or_class).default_params()


def get_params_description(solver_name_or_class):
    '''
    Returns a description of the parameters for the specified solver.
    '''
    return _get_solver_class(solver_name_or_class).params_description()


def get_solver_description(solver_name_or_class):
    '''
    Returns a brief description of the specified solver.
    '''
    return _get_solver_class(solver_name_or_class).solver_description


def run_solver(solver_name, listmode, model, output_folder=None, remove_existing_folder=True,
               verbose=False, raise_error=True, **solver_params):
    """
    Generic function to run a solver via function approach.

    >>> reconstruction = run_solver('grid', listmode, model, beta=0.1)

    Parameters
    ----------
    solver_name: str
        'grid' or 'particles'
    listmode: Listmode
        The events to reconstruct from
    model: ForwardModel
        The forward model
    output_folder: str, Path or None
        If given, the parameters, the run log (dynpet_log.json) and the result are written there
    remove_existing_folder: bool
        If True and output_folder exists it is deleted first
    verbose: bool
        If True, output is verbose
    raise_error: bool
        If True, an error is raised if the reconstruction fails (default). If False, the error is
        logged in the log file and None is returned.
    **solver_params: keyword args
        Solver specific arguments (they can be retrieved with 'get_default_params(solver_name)')

    Returns
    -------
    reconstruction: Reconstruction
    """
    SolverClass = _get_solver_class(solver_name)
    output_folder = SolverClass.initialize_folder(output_folder, remove_existing_folder)
    return SolverClass.run(listmode, model, solver_params, output_folder=output_folder, verbose=verbose,
                           raise_error=raise_error)
