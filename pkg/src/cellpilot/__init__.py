"""cellpilot: a deterministic idle-mode cell (re)selection simulator plus a
policy-gradient engine that tunes the six broadcast reselection parameters.

Subpackages follow the pipeline: `topology` (scenario geometry), `radio`
(propagation), `reselect` (the (re)selection state machine), `traffic`
(UE mode/mobility processes), `scheduler` (bandwidth allocation),
`simcore` (the stepped engine), `rlenv` (observations/actions/rewards),
`policy` (the Gaussian MLP + optimizer), `trainer` (training loop), and
`cli` (command-line entry point).
"""

__version__ = "0.1.0"
