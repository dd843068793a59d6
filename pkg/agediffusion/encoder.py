import datetime
import json

import numpy as np

from agediffusion.models.base_model import Model


class JSONEncoder(json.JSONEncoder):
    include_nulls = False

    def default(self, o):
        if isinstance(o, Model):
            dikt = {}
            for key, value in o.to_dict().items():
                if value is None and not self.include_nulls:
                    continue
                dikt[key] = value
            return dikt
        if isinstance(o, np.integer):
            return int(o)
        if isinstance(o, np.floating):
            return float(o)
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, (datetime.date, datetime.datetime)):
            return o.isoformat()
        return json.JSONEncoder.default(self, o)


def dumps(obj) -> str:
    """Canonical JSON: sorted keys, fixed separators, trailing newline"""
    return json.dumps(obj, cls=JSONEncoder, sort_keys=True, indent=2) + "\n"
