
import logging

from .exceptions import ConfigurationError

logger = logging.getLogger(__name__)

class ElementsManager(object):
    """
    A class managing a collection of 'elements'.
    Those elements are expected to be objects that
    * can be compared for equality against each other
    * have the attribute .identifier
    """
    DEFAULT_ELEMENTS = []
    ELEMENT_NAME = "element"

    def __init__(self, elements=None):
        if elements:
            self._elements = list(elements)
        else:
            self._elements = list(self.DEFAULT_ELEMENTS)

    def register(self, element, pos=-1):
        if element in self._elements or element.identifier in self.identifiers():
            logger.warning("Won't register %s as it's already present: %s", self.ELEMENT_NAME, element.identifier)
            return
        if pos == -1: pos = len(self._elements)
        self._elements.insert(pos, element)

    def deregister(self, element):
        if element in self._elements:
            self._elements.remove(element)
        else:
            logger.warning("Trying to deregister a %s that's not registered currently: %s", self.ELEMENT_NAME, element)

    def get(self, identifier):
        for element in self._elements:
            if element.identifier == identifier:
                return element
        raise ConfigurationError('unknown {} {!r}; choose from {}'.format(
            self.ELEMENT_NAME, identifier, ', '.join(self.identifiers())))

    def identifiers(self):
        return list(self.iter_identifiers())

    def iter_identifiers(self):
        for element in self._elements:
            yield element.identifier

    def iter_elements(self):
        for element in self._elements:
            yield element
