"""
base class for reconstruction solvers.
"""
import time
import copy
from pathlib import Path
import datetime
import json
import traceback
import shutil

from ..version import version as dynpet_version
from ..core import BaseDynpetObject, check_json, write_grid_measure, read_grid_measure, GridMeasure


_log_file = 'dynpet_log.json'
_params_file = 'dynpet_params.json'


class DynpetSolverError(RuntimeError):
    """Raised when a solver fails (divergence, non finite iterate, ...)."""
    pass


class Reconstruction:
    """
    Output of a solver run.

    Parameters
    ----------
    solver_name: str
    result: GridMeasure or ParticleSet
        The minimizer
    value: ObjectiveValue
        The functional at `result`
    diagnostics: dict
        Per iteration history and solver specific diagnostics (json serializable)
    """
    def __init__(self, solver_name, result, value, diagnostics=None):
        self.solver_name = solver_name
        self.result = result
        self.value = value
        self.diagnostics = diagnostics if diagnostics is not None else {}

    def __repr__(self):
        return f'Reconstruction ({self.solver_name}): {self.result} {self.value}'

    def save(self, folder):
        folder = Path(folder)
        folder.mkdir(parents=True, exist_ok=True)
        if isinstance(self.result, GridMeasure):
            write_grid_measure(self.result, folder / 'grid_measure.bin')
        else:
            self.result.dump_to_json(folder / 'particles.json')


class BaseSolver:
    """
    Solvers are used through class methods only, the state of a run lives in its output folder
    (parameters, run log and result).
    """
    solver_name = ''
    _default_params = {}
    _params_description = {}
    solver_description = ''

    # class method zone

    @classmethod
    def default_params(cls):
        return copy.deepcopy(cls._default_params)

    @classmethod
    def params_description(cls):
        return copy.deepcopy(cls._params_description)

    @classmethod
    def check_params(cls, new_params):
        params = cls.default_params()
        bad_params = [p for p in new_params.keys() if p not in params.keys()]
        if len(bad_params) > 0:
            raise AttributeError('Bad parameters: ' + str(bad_params))
        params.update(new_params)
        params = cls._check_params(params)
        return params

    @classmethod
    def initialize_folder(cls, output_folder, remove_existing_folder=False):
        if output_folder is None:
            return None
        output_folder = Path(output_folder)
        if output_folder.is_dir():
            if remove_existing_folder:
                shutil.rmtree(str(output_folder))
            else:
                raise ValueError(f'Folder {output_folder} already exists')
        output_folder.mkdir(parents=True, exist_ok=True)
        return output_folder

    @classmethod
    def _dump_params(cls, output_folder, params):
        with (output_folder / _params_file).open(mode='w', encoding='utf8') as f:
            all_params = dict(solver_name=cls.solver_name, solver_params=params)
            json.dump(check_json(copy.deepcopy(all_params)), f, indent=4)

    @classmethod
    def run(cls, listmode, model, params=None, output_folder=None, verbose=False, raise_error=True):
        """
        Run the solver on one listmode.

        Parameters
        ----------
        listmode: Listmode
            The events E
        model: ForwardModel
            The forward model (also gives the grid)
        params: dict or None
            Solver parameters, missing keys take the default
        output_folder: str, Path or None
            If given, parameters, run log and result are written there
        verbose: bool
        raise_error: bool
            If False a failed run returns None and the error is only logged

        Returns
        -------
        reconstruction: Reconstruction or None
        """
        params = cls.check_params(params if params is not None else {})
        cls._check_inputs(listmode, model, params)
        if output_folder is not None:
            output_folder = Path(output_folder)
            output_folder.mkdir(parents=True, exist_ok=True)
            cls._dump_params(output_folder, params)

        log = {
            'solver_name': cls.solver_name,
            'dynpet_version': dynpet_version,
            'datetime': datetime.datetime.now(),
            'num_events': len(listmode),
            'params': copy.deepcopy(params),
        }
        reconstruction = None
        t0 = time.perf_counter()
        try:
            reconstruction = cls._run(listmode, model, params, verbose)
            run_time = float(time.perf_counter() - t0)
            has_error = False
        except Exception:
            has_error = True
            run_time = None
            log['error_trace'] = traceback.format_exc()
        log['error'] = has_error
        log['run_time'] = run_time

        if reconstruction is not None:
            log['objective'] = reconstruction.value.to_dict()
            log['diagnostics'] = copy.deepcopy(reconstruction.diagnostics)

        if output_folder is not None:
            with (output_folder / _log_file).open('w', encoding='utf8') as f:
                json.dump(check_json(log), f, indent=4)
            if reconstruction is not None:
                reconstruction.save(output_folder)

        if verbose:
            if has_error:
                print(f'Error running {cls.solver_name}')
            else:
                print(f'{cls.solver_name} run time {run_time:0.2f}s {reconstruction.value}')

        if has_error and raise_error:
            print(log['error_trace'])
            where = f' in {output_folder / _log_file}' if output_folder is not None else ''
            raise DynpetSolverError(f'Reconstruction with {cls.solver_name} failed. '
                                    f'You can inspect the error trace{where}')
        return reconstruction

    @classmethod
    def get_result_from_folder(cls, output_folder):
        """
        Load the result of a previous run.

        Returns
        -------
        result: GridMeasure or ParticleSet
        log: dict
        """
        output_folder = Path(output_folder)
        log_file = output_folder / _log_file
        if not log_file.is_file():
            raise DynpetSolverError(f'the folder {output_folder} does not contain {_log_file}')
        with log_file.open('r', encoding='utf8') as f:
            log = json.load(f)
        if bool(log['error']):
            raise DynpetSolverError(f'Reconstruction failed. You can inspect the error trace in {log_file}')

        if (output_folder / 'grid_measure.bin').is_file():
            result = read_grid_measure(output_folder / 'grid_measure.bin')
        else:
            result = BaseDynpetObject.load_from_json(output_folder / 'particles.json')
        return result, log

    # Zone to be implemented

    @classmethod
    def _check_params(cls, params):
        # optional
        return params

    @classmethod
    def _check_inputs(cls, listmode, model, params):
        if not listmode.geometry.is_same(model.geometry):
            raise ValueError('listmode and model geometries differ')

    @classmethod
    def _run(cls, listmode, model, params, verbose):
        # need be implemented in subclass
        raise NotImplementedError
