import logging, os
import yaml
logger = logging.getLogger(__name__)
def _load_yamlconfig(self, configfile):
    yamlconfig = None
    configfile = os.path.abspath(configfile)
    for includes in yamlconfig.get("includes", []):
        try:
            logger.debug("loading include '{0}'".format(includes))
            yamlconfig.update(yaml.safe_load(open(includes)))
        except Exception as e:
            raise PystemonConfigException("failed to load '{0}': {1}".format(includes, e))
    return yamlconfig
