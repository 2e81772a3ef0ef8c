"""pairpillar: design and simulation toolkit for broadband micropillar
photon-pair sources.

Modules
-------
layered    transfer-matrix optics: spectra, Q, field profiles
pillar     scalar guided-mode solver for the cylindrical pillar
emitter    Purcell / beta / internal-efficiency model with calibration
cascade    pulsed two-photon-drive dynamics, photon records, g2, visibility
tcspc      decay models, histogram synthesis, maximum-likelihood fitting
budget     count-rate to extraction-efficiency accounting
optimizer  design evaluation, sweeps and search
config     configuration loading and validation
cli        command-line front end
"""

__version__ = "0.1.0"

from . import budget, cascade, config, emitter, layered, optimizer, pillar, tcspc  # noqa: F401,E402
