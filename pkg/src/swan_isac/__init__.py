"""Joint beamforming and pinching-antenna placement for segmented-waveguide ISAC."""
