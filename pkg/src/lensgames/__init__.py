"""Compositional Bayesian lenses, statistical games, and their
discrete-time dynamical realisations.

The package is organised as:

- :mod:`lensgames.prob` -- exact finite and linear-Gaussian states,
  channels, inversion, divergences and serialisation;
- :mod:`lensgames.lens` -- Bayesian lenses, their composition laws and the
  randomized verifier for the inversion-composition law;
- :mod:`lensgames.games` -- contexts, strategy spaces, open games and the
  statistical game families (maximum likelihood, inference, variational
  autoencoder, autoencoder, active inference);
- :mod:`lensgames.dynamics` -- discrete-time dynamical systems as lenses,
  closures, trajectories and fixed-point detection;
- :mod:`lensgames.realisation` -- gradient-descent realisations of games
  and the fixed-point-versus-equilibrium consistency check;
- :mod:`lensgames.cli` -- reproducible command-line front end.
"""
__version__ = "0.1.0"
