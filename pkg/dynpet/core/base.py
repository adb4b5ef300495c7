from pathlib import Path
import importlib
from copy import deepcopy
import json

from .core_tools import check_json


class BaseDynpetObject:
    """
    Base class for the serializable objects of dynpet (scanner geometry,
    ground truth, particle sets).

    Subclasses store the arguments needed to re-create themselves in
    `self._kwargs`. Nested dynpet objects inside `_kwargs` are serialized
    recursively.
    """
    def __init__(self):
        self._kwargs = {}
        self._annotations = {}

    def annotate(self, **new_annotations):
        self._annotations.update(new_annotations)

    def get_annotation(self, key, copy=True):
        v = self._annotations.get(key, None)
        if copy:
            v = deepcopy(v)
        return v

    def to_dict(self):
        '''
        Make a nested serialized dictionary out of the object. The dictionary can be used to
        re-initialize the object with BaseDynpetObject.from_dict(dump_dict)

        Returns
        -------
        dump_dict: dict
            Serialized dictionary
        '''
        class_name = str(type(self)).replace("<class '", "").replace("'>", '')
        module = class_name.split('.')[0]
        imported_module = importlib.import_module(module)

        try:
            version = imported_module.__version__
        except AttributeError:
            version = 'unknown'

        kwargs = {}
        for k, v in self._kwargs.items():
            if isinstance(v, BaseDynpetObject):
                v = v.to_dict()
            kwargs[k] = v

        dump_dict = {
            'class': class_name,
            'module': module,
            'kwargs': kwargs,
            'version': version,
            'annotations': deepcopy(self._annotations),
        }
        return dump_dict

    @staticmethod
    def from_dict(d):
        '''
        Instantiate object from dictionary

        Parameters
        ----------
        d: dictionary
            Python dictionary as returned by to_dict()

        Returns
        -------
        obj: BaseDynpetObject
            The loaded object
        '''
        return _load_object_from_dict(d)

    def clone(self):
        return BaseDynpetObject.from_dict(deepcopy(self.to_dict()))

    @staticmethod
    def _get_file_path(file_path, extensions):
        file_path = Path(file_path)
        ext = extensions[0]
        if file_path.suffix == '':
            file_path = file_path.parent / (file_path.name + ext)
        file_path.parent.mkdir(parents=True, exist_ok=True)
        if file_path.suffix not in extensions:
            raise ValueError(f"Extension must be one of {extensions}")
        return file_path

    def dump_to_json(self, file_path):
        """
        Dump object to json file.
        The object can be re-loaded with BaseDynpetObject.load_from_json(json_file)

        Parameters
        ----------
        file_path: str or Path
            Path of the json file
        """
        file_path = self._get_file_path(file_path, ['.json'])
        file_path.write_text(
            json.dumps(check_json(self.to_dict()), indent=4),
            encoding='utf8'
        )
        return file_path

    @staticmethod
    def load_from_json(file_path):
        file_path = Path(file_path)
        with open(file_path, 'r', encoding='utf8') as f:
            d = json.load(f)
        return BaseDynpetObject.from_dict(d)


def is_dict_dynpet_object(d):
    return isinstance(d, dict) and 'class' in d and 'kwargs' in d


def _load_object_from_dict(dic):
    if 'kwargs' not in dic:
        raise ValueError(f'This dict cannot be loaded into a dynpet object {dic}')
    kwargs = deepcopy(dic['kwargs'])

    # handle nested
    for k, v in kwargs.items():
        if is_dict_dynpet_object(v):
            kwargs[k] = _load_object_from_dict(v)

    class_name = dic['class']
    module_name, _, cls_name = class_name.rpartition('.')
    module = importlib.import_module(module_name)
    cls = getattr(module, cls_name)

    obj = cls(**kwargs)
    obj._annotations.update(dic.get('annotations', {}))
    return obj
